"""Block-unitary realization and the transfer function it generates.

``build_generating_unitary`` collects the defect data of a validated
certificate into a pair of frames, extends the forced isometry to a unitary
U on (ran D) + (sum of ran F_i), and the transfer function of U* becomes the
multiplier that lifts the last tuple coordinate through the dilation
isometry.  The rest of the module evaluates that transfer function, checks
the Schur identity and boundary innerness, splits off the unitary part of
its constant term, and runs the full intertwining verification suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import hardy, matcore
from .errors import (
    DimensionMismatch,
    IsometryDefect,
    NotContraction,
    NotIsometric,
    SingularResolvent,
)
from .matcore import adj, operator_norm
from .tuples import OperatorTuple, DilationCertificate, hat, spectral_radius

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class TransferRealization:
    """Blocks of U = [[A, B], [C, D]] on (ran D) + (sum ran F_i).

    ``partition`` lists the sizes of the lower-right block spaces; block i is
    driven by the i-th coordinate (the trailing block shares the last one).
    The transfer function of U* is
    Phi(z) = A* + C* E(z) (I - D* E(z))^{-1} B*.
    Compressions produced by ``split_transfer`` reuse this container without the
    unitarity property, so unitarity is checked where a realization is built.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    partition: tuple[int, ...]

    @property
    def dim_e(self) -> int:
        return self.a.shape[0]

    @property
    def dim_f(self) -> int:
        return self.d.shape[0]

    def unitary_matrix(self) -> np.ndarray:
        top = np.hstack([self.a, self.b])
        bottom = np.hstack([self.c, self.d])
        return np.vstack([top, bottom])


def unitarity_residual(r: TransferRealization) -> float:
    u = r.unitary_matrix()
    return operator_norm(adj(u) @ u - np.eye(u.shape[0]))


def _domain_image_frames(
    t: OperatorTuple, cert: DilationCertificate
) -> tuple[np.ndarray, np.ndarray, int, int]:
    dc = adj(cert.d_frame) @ cert.defect
    col_plain, col_shift = hardy.defect_block_maps(cert, t)
    e = dc.shape[0]
    f = col_plain.shape[0]
    t_n = t.op(t.n)
    domain = np.vstack([dc, col_shift])
    image = np.vstack([dc @ adj(t_n), col_plain])
    return domain, image, e, f


def build_generating_unitary(
    t: OperatorTuple,
    cert: DilationCertificate,
    tol: float = 1e-8,
    completion_order: Sequence[int] | None = None,
) -> TransferRealization:
    """Unitary U with U(D h, F_i T_i* h) = (D T_n* h, F_i h) for all h.

    The frames are collected over the standard basis of the underlying space
    and extended by the deterministic completion rule; a Gram mismatch
    between the two frames signals an invalid certificate.
    """
    domain, image, e, f = _domain_image_frames(t, cert)
    try:
        u = matcore.unitary_completion(domain, image, e + f, tol, completion_order)
    except NotIsometric as exc:
        raise IsometryDefect(exc.residual) from exc
    return TransferRealization(
        a=u[:e, :e],
        b=u[:e, e:],
        c=u[e:, :e],
        d=u[e:, e:],
        partition=cert.ranks,
    )


def generating_residual(
    t: OperatorTuple, cert: DilationCertificate, r: TransferRealization
) -> float:
    """||U(D h, F_i T_i* h) - (D T_n* h, F_i h)|| over a full basis."""
    domain, image, _, _ = _domain_image_frames(t, cert)
    return operator_norm(r.unitary_matrix() @ domain - image)


def _diag_e(partition: Sequence[int], z: Sequence[complex]) -> np.ndarray:
    if len(z) != len(partition):
        raise DimensionMismatch("evaluation point arity does not match the partition")
    entries = []
    for zi, size in zip(z, partition):
        entries.extend([complex(zi)] * size)
    return np.diag(np.asarray(entries, dtype=complex))


def transfer_eval(r: TransferRealization, z: Sequence[complex], tol: float = 1e-8) -> np.ndarray:
    """Phi(z) = A* + C* E(z) (I - D* E(z))^{-1} B*.

    Interior points are always regular; on the torus the resolvent may be
    singular, which surfaces as SingularResolvent.
    """
    e_z = _diag_e(r.partition, z)
    x = matcore.inv_resolvent(adj(r.d), e_z, tol)
    return adj(r.a) + adj(r.c) @ e_z @ x @ adj(r.b)


def schur_identity_residual(r: TransferRealization, z: Sequence[complex]) -> float:
    """Deviation in  I - Phi* Phi = B (I - E* D)^{-1} (I - E* E) (I - D* E)^{-1} B*."""
    e_z = _diag_e(r.partition, z)
    phi = transfer_eval(r, z)
    lhs = np.eye(r.dim_e) - adj(phi) @ phi
    x1 = matcore.inv_resolvent(adj(e_z), r.d)
    x2 = matcore.inv_resolvent(adj(r.d), e_z)
    mid = np.eye(r.dim_f) - adj(e_z) @ e_z
    rhs = r.b @ x1 @ mid @ x2 @ adj(r.b)
    return operator_norm(lhs - rhs)


@dataclass(frozen=True)
class InnerReport:
    max_deviation: float
    singular_points: int
    grid_points: int


def torus_grid(m: int, grid: int) -> list[tuple[complex, ...]]:
    angles = [np.exp(2j * np.pi * l / grid) for l in range(grid)]
    return [tuple(p) for p in itertools.product(angles, repeat=m)]


def inner_check(r: TransferRealization, grid: int) -> InnerReport:
    """Max over the torus grid of ||Phi(w)* Phi(w) - I||, skipping (and
    counting) points with a singular resolvent."""
    eye = np.eye(r.dim_e)
    max_dev = 0.0
    singular = 0
    points = torus_grid(len(r.partition), grid)
    for zeta in points:
        try:
            phi = transfer_eval(r, zeta)
        except SingularResolvent:
            singular += 1
            continue
        max_dev = max(max_dev, operator_norm(adj(phi) @ phi - eye))
    return InnerReport(max_dev, singular, len(points))


# ---------------------------------------------------------------------------
# canonical (unitary / completely-non-unitary) decomposition


@dataclass(frozen=True)
class CnuDecomposition:
    h0_frame: np.ndarray
    unitary_block: np.ndarray
    h1_frame: np.ndarray
    cnu_block: np.ndarray
    offdiag_residual: float
    unitary_residual: float
    cnu_spectral_bound: float

    @property
    def h0_dim(self) -> int:
        return self.h0_frame.shape[1]


def cnu_decomposition(a, tol: float = 1e-9) -> CnuDecomposition:
    """Split a contraction into its unitary and completely-non-unitary parts.

    H0 is the intersection of the kernels of I - A*^m A^m and I - A^m A*^m
    for m = 1..dim; the compression of A to H0 is unitary and the H1
    compression has no unimodular eigenvalues (its spectral bound is
    reported for cross-checking).
    """
    m = matcore.as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch("canonical decomposition needs a square matrix")
    norm = operator_norm(m)
    if norm > 1.0 + tol:
        raise NotContraction(f"norm {norm:.6f} exceeds 1")
    d = m.shape[0]
    eye = np.eye(d, dtype=complex)
    stack_rows = []
    power = eye
    for _ in range(d):
        power = power @ m
        stack_rows.append(eye - adj(power) @ power)
        stack_rows.append(eye - power @ adj(power))
    stacked = np.vstack(stack_rows) if stack_rows else np.zeros((0, d), dtype=complex)
    h0 = matcore.kernel_basis(stacked, tol)
    h1 = matcore.kernel_basis(adj(h0), tol) if h0.shape[1] else np.eye(d, dtype=complex)
    if h0.shape[1] == d:
        h1 = np.zeros((d, 0), dtype=complex)
    w = adj(h0) @ m @ h0
    e_blk = adj(h1) @ m @ h1
    offdiag = 0.0
    if h0.shape[1] and h1.shape[1]:
        offdiag = max(
            operator_norm(adj(h0) @ m @ h1),
            operator_norm(adj(h1) @ m @ h0),
        )
    unit_res = operator_norm(adj(w) @ w - np.eye(h0.shape[1])) if h0.shape[1] else 0.0
    if e_blk.shape[0]:
        cnu_bound = float(np.max(np.abs(matcore.eigvals_small(e_blk))))
    else:
        cnu_bound = 0.0
    return CnuDecomposition(
        h0_frame=h0,
        unitary_block=w,
        h1_frame=h1,
        cnu_block=e_blk,
        offdiag_residual=offdiag,
        unitary_residual=unit_res,
        cnu_spectral_bound=cnu_bound,
    )


# ---------------------------------------------------------------------------
# Taylor expansion of the transfer function


def _series_convolve(
    s1: dict[MultiIndex, np.ndarray], s2: dict[MultiIndex, np.ndarray], cap: int
) -> dict[MultiIndex, np.ndarray]:
    out: dict[MultiIndex, np.ndarray] = {}
    for k1, m1 in s1.items():
        for k2, m2 in s2.items():
            k = tuple(a + b for a, b in zip(k1, k2))
            if sum(k) > cap:
                continue
            prod = m1 @ m2
            if k in out:
                out[k] = out[k] + prod
            else:
                out[k] = prod
    return out


def _block_selectors(partition: Sequence[int]) -> list[np.ndarray]:
    total = sum(partition)
    out = []
    start = 0
    for size in partition:
        p = np.zeros((total, total), dtype=complex)
        p[start : start + size, start : start + size] = np.eye(size)
        out.append(p)
        start += size
    return out


def transfer_taylor(r: TransferRealization, cap: int) -> hardy.SymbolSeries:
    """Taylor coefficients of Phi up to total degree ``cap``.

    Expands A* + sum_m C* E(z) (D* E(z))^m B* by collecting the block
    variables, so feeding the result to a truncated multiplier reproduces
    transfer_eval at interior points up to a geometric tail.
    """
    m_vars = len(r.partition)
    selectors = _block_selectors(r.partition)
    f = r.dim_f

    def degree_one(left: np.ndarray) -> dict[MultiIndex, np.ndarray]:
        out = {}
        for i, p in enumerate(selectors):
            if r.partition[i] == 0:
                continue
            k = tuple(1 if j == i else 0 for j in range(m_vars))
            out[k] = left @ p
        return out

    de = degree_one(adj(r.d))  # D* E(z)
    ce = degree_one(adj(r.c))  # C* E(z)

    zero: MultiIndex = (0,) * m_vars
    geom: dict[MultiIndex, np.ndarray] = {zero: np.eye(f, dtype=complex)}
    power: dict[MultiIndex, np.ndarray] = {zero: np.eye(f, dtype=complex)}
    for _ in range(cap):
        power = _series_convolve(power, de, cap)
        if not power:
            break
        for k, v in power.items():
            if k in geom:
                geom[k] = geom[k] + v
            else:
                geom[k] = v

    middle = _series_convolve(ce, geom, cap)
    b_adj = adj(r.b)
    coeffs: dict[MultiIndex, np.ndarray] = {k: v @ b_adj for k, v in middle.items()}
    a_adj = adj(r.a)
    coeffs[zero] = coeffs.get(zero, np.zeros_like(a_adj)) + a_adj
    return hardy.symbol_series(m_vars, cap, coeffs)


def transfer_strict_series(r: TransferRealization, cap: int) -> hardy.SymbolSeries:
    """Taylor series of Phi - A* (the strictly positive-degree part)."""
    full = transfer_taylor(r, cap)
    zero = (0,) * full.var_count
    coeffs = {k: v for k, v in full.coeffs.items() if k != zero}
    coeffs[zero] = np.zeros((full.out_dim, full.in_dim), dtype=complex)
    return hardy.symbol_series(full.var_count, cap, coeffs)


# ---------------------------------------------------------------------------
# dilation-level identity checks


def lifting_residual(
    t: OperatorTuple,
    cert: DilationCertificate,
    r: TransferRealization,
    cap: int,
    taylor_cap: int | None = None,
) -> tuple[float, float]:
    """Residual and tail bound for the commutant lifting  M_Phi* Pi = Pi T_n*.

    Verified coefficientwise: for every k in the box the coefficient of
    Pi T_n* h is compared against sum_j Phi_j* (Pi h)_{k+j}.  The Taylor cap
    defaults to (number of variables) * cap so every pairing inside the box
    is present and only the genuine infinite tail is dropped.
    """
    hat_t = hat(t, t.n)
    m_vars = hat_t.n
    if taylor_cap is None:
        taylor_cap = m_vars * cap
    pi = hardy.canonical_isometry(hat_t, cert.defect, cert.d_frame, cap)
    grid = pi.coefficient_operators()
    phi = transfer_taylor(r, taylor_cap)
    t_n_adj = adj(t.op(t.n))
    res = 0.0
    for k in itertools.product(range(cap + 1), repeat=m_vars):
        lhs = grid[k] @ t_n_adj
        rhs = np.zeros_like(lhs)
        for j, phi_j in phi.coeffs.items():
            kk = tuple(a + b for a, b in zip(k, j))
            if any(x > cap for x in kk):
                continue
            rhs = rhs + adj(phi_j) @ grid[kk]
        res = max(res, operator_norm(lhs - rhs))
    rho = max(spectral_radius(m) for m in hat_t.ops) if hat_t.ops else 0.0
    bound = hardy.tail_tolerance(rho, cap, np.sqrt(t.dim))
    return res, bound


def strict_multiplier_residual(
    t: OperatorTuple,
    cert: DilationCertificate,
    r: TransferRealization,
    cap: int,
    taylor_cap: int | None = None,
) -> tuple[float, float]:
    """Residual of the strict-part multiplier identity.

    Feeding a constant through the B*-block, the block shift and the
    block-column pullback must agree with the dilation-isometry adjoint of
    the multiplier by the strictly-positive-degree part of the transfer
    function; the gap is the multiplier's Taylor tail beyond the cap.
    """
    hat_t = hat(t, t.n)
    m_vars = hat_t.n
    if taylor_cap is None:
        taylor_cap = m_vars * cap
    pi = hardy.canonical_isometry(hat_t, cert.defect, cert.d_frame, cap)
    j_map = hardy.tuple_embedding(hat_t, cap)
    col_plain, _ = hardy.defect_block_maps(cert, hat_t)
    col_adj = adj(col_plain)
    tilde = transfer_strict_series(r, taylor_cap)
    b_adj = adj(r.b)
    e = cert.rank_d
    zero = (0,) * m_vars
    res = 0.0
    for idx in range(e):
        vec = np.zeros(e, dtype=complex)
        vec[idx] = 1.0
        f0 = hardy.monomial(zero, b_adj @ vec, m_vars, cap)
        lhs = j_map.adjoint_apply(
            hardy.apply_coefficientwise(col_adj, hardy.block_shift(f0, cert.ranks))
        )
        rhs = pi.adjoint_apply(hardy.mult_symbol(tilde, hardy.monomial(zero, vec, m_vars, cap)))
        res = max(res, float(np.linalg.norm(lhs - rhs)))
    rho = max(spectral_radius(m) for m in hat_t.ops) if hat_t.ops else 0.0
    bound = hardy.tail_tolerance(rho, cap, np.sqrt(t.dim))
    return res, bound


def taylor_consistency_residual(
    r: TransferRealization, z: Sequence[complex], cap: int
) -> float:
    """|transfer_eval - truncated Taylor evaluation| at an interior point."""
    phi = transfer_taylor(r, cap)
    direct = transfer_eval(r, z)
    acc = np.zeros_like(direct)
    for k, coeff in phi.coeffs.items():
        w = 1.0 + 0.0j
        for zi, ki in zip(z, k):
            w *= complex(zi) ** ki
        acc = acc + w * coeff
    return operator_norm(direct - acc)


# ---------------------------------------------------------------------------
# the full verification suite


@dataclass(frozen=True)
class CheckRow:
    name: str
    residual: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple[CheckRow, ...]
    cap: int
    taylor_cap: int
    rho: float
    inner_singular: int
    inner_total: int

    @property
    def ok(self) -> bool:
        return all(row.ok for row in self.rows)

    def row(self, name: str) -> CheckRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def run_identity_suite(
    t: OperatorTuple,
    cert: DilationCertificate,
    r: TransferRealization | None = None,
    cap: int = hardy.DEFAULT_CAP,
    schur_points: int = 100,
    inner_grid: int = 32,
    seed: int = 0,
) -> VerificationReport:
    """Evaluate every intertwining identity the dilation construction asserts.

    Residuals are compared against the geometric tail bound padded with an
    absolute floor of 1e-10; nilpotent tuples have zero tails, so there the
    checks are effectively exact.
    """
    if r is None:
        r = build_generating_unitary(t, cert)
    hat_t = hat(t, t.n)
    cap = hardy.effective_cap(hat_t, cap)
    m_vars = hat_t.n
    taylor_cap = m_vars * cap
    rho = max(spectral_radius(m) for m in hat_t.ops)
    tail = hardy.tail_tolerance(rho, cap, np.sqrt(t.dim))

    pi = hardy.canonical_isometry(hat_t, cert.defect, cert.d_frame, cap)
    j_map = hardy.tuple_embedding(hat_t, cap)

    rows: list[CheckRow] = []
    rows.append(CheckRow("generating_identity", generating_residual(t, cert, r), 1e-9))
    rows.append(CheckRow("unitarity", unitarity_residual(r), 1e-10))

    defect_max = 0.0
    for idx in range(t.dim):
        h = np.zeros(t.dim, dtype=complex)
        h[idx] = 1.0
        defect_max = max(defect_max, abs(pi.isometry_defect(h)))
    rows.append(CheckRow("pi_isometry_defect", defect_max, tail))

    rows.append(CheckRow("intertwine_mz", hardy.intertwine_mz_residual(pi, hat_t), 1e-12))
    rows.append(
        CheckRow("defect_embedding", hardy.defect_embedding_residual(pi, j_map, cert), 1e-10)
    )

    shifted, plain = hardy.block_pullback_residuals(hat_t, cert, j_map, cap)
    rows.append(CheckRow("block_pullback_shifted", shifted, tail))
    rows.append(CheckRow("block_pullback_plain", plain, tail))
    rows.append(CheckRow("adjoint_monomial", hardy.adjoint_monomial_residual(pi, cert, cap), tail))
    colligation = hardy.colligation_pullback_residual(hat_t, cert, pi, j_map, r.c, r.d, cap)
    rows.append(CheckRow("colligation_pullback", colligation, tail))

    strict_res, strict_bound = strict_multiplier_residual(t, cert, r, cap, taylor_cap)
    rows.append(CheckRow("strict_multiplier", strict_res, strict_bound))

    lift, lift_bound = lifting_residual(t, cert, r, cap, taylor_cap)
    rows.append(CheckRow("lifting", lift, lift_bound))

    rng = np.random.default_rng(seed)
    schur_max = 0.0
    for _ in range(schur_points):
        radii = 0.95 * np.sqrt(rng.uniform(0, 1, size=m_vars))
        angles = rng.uniform(0, 2 * np.pi, size=m_vars)
        z = tuple(radii * np.exp(1j * angles))
        schur_max = max(schur_max, schur_identity_residual(r, z))
    rows.append(CheckRow("schur_identity", schur_max, 1e-9))

    inner = inner_check(r, inner_grid)
    rows.append(CheckRow("inner_deviation", inner.max_deviation, 1e-7))
    rows.append(
        CheckRow(
            "inner_singular_fraction",
            inner.singular_points / inner.grid_points,
            0.01,
        )
    )

    return VerificationReport(
        rows=tuple(rows),
        cap=cap,
        taylor_cap=taylor_cap,
        rho=rho,
        inner_singular=inner.singular_points,
        inner_total=inner.grid_points,
    )
