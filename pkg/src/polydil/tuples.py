"""Commuting contraction tuples and membership certificates.

A tuple T = (T_1, ..., T_n) of commuting contractions is certified to lie in
the dilatable class when its first n-1 coordinates form a pure Szego tuple
and the last defect I - T_n T_n* splits into positive operators G_i whose
alternating conjugation products stay positive.  ``verify_certificate`` validates a
supplied family {G_i} and packages the derived defect operators and range
frames that the realization builder consumes; it does not search for G_i.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import matcore
from .errors import (
    DimensionMismatch,
    GNotPsd,
    HypothesisFailed,
    IndexOutOfRange,
    NotCommuting,
    NotContractive,
    NotPure,
    NotSzego,
    ProductNotPsd,
    SumMismatch,
)
from .matcore import adj, operator_norm

COMMUTE_TOL = 1e-10
CONTRACT_TOL = 1e-8
CERT_TOL = 1e-8
PURE_TOL = 1e-6


@dataclass(frozen=True)
class OperatorTuple:
    """n commuting contractions on C^dim.

    ``ops`` are d x d complex matrices; validity (commutators within
    ``commute_tol``, norms within ``1 + contract_tol``) is established by
    :func:`make_tuple` and assumed afterwards.
    """

    ops: tuple[np.ndarray, ...]
    dim: int
    commute_tol: float
    contract_tol: float

    @property
    def n(self) -> int:
        return len(self.ops)

    def op(self, i: int) -> np.ndarray:
        """1-based coordinate access, matching the T_i notation."""
        if not 1 <= i <= self.n:
            raise IndexOutOfRange(f"index {i} outside 1..{self.n}")
        return self.ops[i - 1]


def make_tuple(
    matrices: Sequence,
    commute_tol: float = COMMUTE_TOL,
    contract_tol: float = CONTRACT_TOL,
) -> OperatorTuple:
    """Validate and build an OperatorTuple."""
    ops = tuple(matcore.as_matrix(m) for m in matrices)
    if not ops:
        raise DimensionMismatch("a tuple needs at least one operator")
    d = ops[0].shape[0]
    for m in ops:
        if m.shape != (d, d):
            raise DimensionMismatch(f"expected {d}x{d} blocks, got {m.shape}")
    for i, m in enumerate(ops):
        norm = operator_norm(m)
        if norm > 1.0 + contract_tol:
            raise NotContractive(i + 1, norm)
    for i, j in itertools.combinations(range(len(ops)), 2):
        res = operator_norm(ops[i] @ ops[j] - ops[j] @ ops[i])
        if res > commute_tol:
            raise NotCommuting(i + 1, j + 1, res)
    return OperatorTuple(ops=ops, dim=d, commute_tol=commute_tol, contract_tol=contract_tol)


def hat(t: OperatorTuple, i: int) -> OperatorTuple:
    """The (n-1)-tuple with the i-th coordinate deleted (1-based)."""
    if not 1 <= i <= t.n:
        raise IndexOutOfRange(f"index {i} outside 1..{t.n}")
    ops = t.ops[: i - 1] + t.ops[i:]
    return OperatorTuple(ops=ops, dim=t.dim, commute_tol=t.commute_tol, contract_tol=t.contract_tol)


def _power_product(ops: Sequence[np.ndarray], exps: Sequence[int], dim: int) -> np.ndarray:
    out = np.eye(dim, dtype=complex)
    for m, e in zip(ops, exps):
        for _ in range(e):
            out = out @ m
    return out


def szego_defect(t: OperatorTuple) -> np.ndarray:
    """The 2^n-term alternating sum  sum_{k in {0,1}^n} (-1)^|k| T^k T*^k."""
    d = t.dim
    out = np.zeros((d, d), dtype=complex)
    for eps in itertools.product((0, 1), repeat=t.n):
        p = _power_product(t.ops, eps, d)
        sign = -1.0 if sum(eps) % 2 else 1.0
        out = out + sign * (p @ adj(p))
    return out


def conjugacy_product(ops: Sequence[np.ndarray], x) -> np.ndarray:
    """Apply the composition  prod_j (Id - C_{T_j})  to X.

    Computed by sequentially subtracting A X A*, which is an independent
    route to the alternating-sum expansion used by :func:`szego_defect`.
    """
    out = matcore.as_matrix(x)
    for a in ops:
        a = matcore.as_matrix(a)
        if a.shape != out.shape:
            raise DimensionMismatch("conjugacy_product needs matching dimensions")
        out = out - a @ out @ adj(a)
    return out


class SzegoCheck(NamedTuple):
    ok: bool
    min_eig: float


def is_szego(t: OperatorTuple, tol: float = CERT_TOL) -> SzegoCheck:
    """Positivity of the Szego defect, reported with its smallest eigenvalue."""
    w, _ = matcore.herm_eig(szego_defect(t), 1e-8)
    min_eig = float(w[0]) if w.size else 0.0
    return SzegoCheck(min_eig >= -tol, min_eig)


def spectral_radius(m, max_doublings: int = 8) -> float:
    """Upper estimate of the spectral radius via ||M^(2^k)||^(1/2^k).

    Every iterate is an upper bound for the spectral radius, so the smallest
    one keeps purity tests and tail bounds on the safe side.  The doubling
    loop always runs to the end (short of an exact zero power): stopping on
    consecutive agreement would misread nilpotent shifts, whose estimates sit
    at 1 for several rounds before collapsing.
    """
    m = matcore.as_matrix(m)
    if m.shape[0] == 0:
        return 0.0
    b = m
    best = operator_norm(b)
    for k in range(1, max_doublings + 1):
        b = b @ b
        norm = operator_norm(b)
        if norm == 0.0:
            return 0.0
        best = min(best, norm ** (1.0 / 2.0**k))
    return best


def is_pure(t: OperatorTuple, tol: float = PURE_TOL) -> bool:
    """True when every coordinate has spectral radius below 1 - tol."""
    return all(spectral_radius(m) < 1.0 - tol for m in t.ops)


@dataclass(frozen=True)
class DilationCertificate:
    """Validated membership data for a tuple T.

    ``g`` are the supplied positive operators, ``f`` their derived defect
    square roots F_i, ``defect`` is D for the deleted-last tuple, and the
    frames are orthonormal bases of ran F_i and ran D in which all
    realization-side coordinates are expressed.
    """

    g: tuple[np.ndarray, ...]
    f: tuple[np.ndarray, ...]
    defect: np.ndarray
    f_frames: tuple[np.ndarray, ...]
    d_frame: np.ndarray
    sum_residual: float
    g_margins: tuple[float, ...]
    product_margins: tuple[float, ...]
    szego_min_eig: float

    @property
    def rank_d(self) -> int:
        return self.d_frame.shape[1]

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(q.shape[1] for q in self.f_frames)


def _min_eig(m: np.ndarray) -> float:
    w, _ = matcore.herm_eig(m, 1e-8)
    return float(w[0]) if w.size else 0.0


def verify_certificate(
    t: OperatorTuple, g_list: Sequence, tol: float = CERT_TOL
) -> DilationCertificate:
    """Validate a certificate {G_i} for T and derive its defect data.

    Checks, in order: the deleted-last tuple is Szego and pure; every G_i is
    Hermitian psd; the G_i sum to I - T_n T_n*; every alternating product
    applied to G_i is psd.  The matching errors identify the first failing
    condition.
    """
    if t.n < 3:
        raise DimensionMismatch("membership certification needs n >= 3")
    if len(g_list) != t.n - 1:
        raise DimensionMismatch(f"expected {t.n - 1} operators G_i, got {len(g_list)}")
    g = tuple(matcore.as_matrix(m) for m in g_list)
    for m in g:
        if m.shape != (t.dim, t.dim):
            raise DimensionMismatch("G_i blocks must match the tuple dimension")

    hat_n = hat(t, t.n)
    szego = is_szego(hat_n, tol)
    if not szego.ok:
        raise NotSzego(szego.min_eig)
    if not is_pure(hat_n):
        raise NotPure(max(spectral_radius(m) for m in hat_n.ops))

    g_margins = []
    for i, gi in enumerate(g):
        me = _min_eig(gi)
        if me < -tol:
            raise GNotPsd(i + 1, me)
        g_margins.append(me)

    t_n = t.op(t.n)
    target = np.eye(t.dim, dtype=complex) - t_n @ adj(t_n)
    sum_res = operator_norm(target - sum(g))
    if sum_res > tol:
        raise SumMismatch(sum_res)

    f = []
    product_margins = []
    for i, gi in enumerate(g):
        others = [t.ops[j] for j in range(t.n - 1) if j != i]
        prod = conjugacy_product(others, gi)
        me = _min_eig(prod)
        if me < -tol:
            raise ProductNotPsd(i + 1, me)
        product_margins.append(me)
        f.append(matcore.psd_sqrt(prod, tol))

    defect = matcore.psd_sqrt(szego_defect(hat_n), tol)
    f_frames = tuple(matcore.range_onb(fi, tol) for fi in f)
    d_frame = matcore.range_onb(defect, tol)
    return DilationCertificate(
        g=g,
        f=tuple(f),
        defect=defect,
        f_frames=f_frames,
        d_frame=d_frame,
        sum_residual=float(sum_res),
        g_margins=tuple(g_margins),
        product_margins=tuple(product_margins),
        szego_min_eig=szego.min_eig,
    )


def last_defect_certificate(t: OperatorTuple, tol: float = CERT_TOL) -> DilationCertificate:
    """Certificate with G_1 = I - T_n T_n* and G_i = 0 otherwise.

    Valid whenever both deleted-first and deleted-last tuples are Szego and
    the deleted-last tuple is pure; these hypotheses are checked explicitly
    before the standard validation runs.
    """
    if t.n < 3:
        raise DimensionMismatch("membership certification needs n >= 3")
    hat_n = hat(t, t.n)
    chk_n = is_szego(hat_n, tol)
    if not chk_n.ok:
        raise HypothesisFailed(f"deleted-last tuple is not Szego (min eig {chk_n.min_eig:.3e})")
    if not is_pure(hat_n):
        raise HypothesisFailed("deleted-last tuple is not pure")
    hat_1 = hat(t, 1)
    chk_1 = is_szego(hat_1, tol)
    if not chk_1.ok:
        raise HypothesisFailed(f"deleted-first tuple is not Szego (min eig {chk_1.min_eig:.3e})")
    t_n = t.op(t.n)
    g1 = np.eye(t.dim, dtype=complex) - t_n @ adj(t_n)
    zeros = np.zeros((t.dim, t.dim), dtype=complex)
    g = [g1] + [zeros] * (t.n - 2)
    return verify_certificate(t, g, tol)
