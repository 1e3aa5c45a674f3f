"""Acceptance gate: one test per criterion, each printing a pass line.

The fixture family is the product-triple grid over Jordan pairs
(d1, d2) in {(2,2), (3,2), (3,3)}, scales r in {1, 0.9} and exponents
(j, k) in {(1,1), (2,1), (2,3)}; everything heavier than certification is
computed once per fixture and shared.
"""

import itertools
import time
from dataclasses import dataclass

import numpy as np
import pytest

from polydil import generators, hardy, matcore, realization as rz, tuples, vonneumann as vn
from polydil.matcore import adj

DIMS = [(2, 2), (3, 2), (3, 3)]
SCALES = [1.0, 0.9]
EXPONENTS = [(1, 1), (2, 1), (2, 3)]

CAP = 12
GRID = 32
VN_POLYS = 100
VN_SEED = 90210


@dataclass
class Fixture:
    label: str
    r_scale: float
    t: tuples.OperatorTuple
    cert: tuples.DilationCertificate
    realization: rz.TransferRealization
    report: rz.VerificationReport


def _passline(criterion: str, detail: str) -> None:
    print(f"PASS {criterion}: {detail}")


@pytest.fixture(scope="module")
def fixtures() -> list[Fixture]:
    out = []
    for (d1, d2), r_scale, (j, k) in itertools.product(DIMS, SCALES, EXPONENTS):
        pair = generators.jordan_pair(d1, d2, r_scale, r_scale)
        t, cert = generators.product_triple(pair, j, k)
        real = rz.build_generating_unitary(t, cert)
        report = rz.run_identity_suite(
            t, cert, real, cap=CAP, schur_points=100, inner_grid=GRID, seed=7
        )
        out.append(
            Fixture(
                label=f"d=({d1},{d2}) r={r_scale} (j,k)=({j},{k})",
                r_scale=r_scale,
                t=t,
                cert=cert,
                realization=real,
                report=report,
            )
        )
    return out


def test_criterion_01_certification_soundness():
    started = time.perf_counter()
    count = 0
    for (d1, d2), r_scale, (j, k) in itertools.product(DIMS, SCALES, EXPONENTS):
        pair = generators.jordan_pair(d1, d2, r_scale, r_scale)
        t, cert = generators.product_triple(pair, j, k)
        assert cert.sum_residual <= 1e-12, (d1, d2, r_scale, j, k, cert.sum_residual)
        assert min(cert.g_margins) >= -1e-10
        assert min(cert.product_margins) >= -1e-10
        assert cert.szego_min_eig >= -1e-10
        count += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"certification took {elapsed:.2f}s"
    _passline(
        "criterion 1 (certification soundness)",
        f"{count} product-triple certificates accepted in {elapsed:.2f}s",
    )


def test_criterion_02_generating_identity(fixtures):
    worst_gen = worst_unit = 0.0
    for fx in fixtures:
        gen = fx.report.row("generating_identity")
        unit = fx.report.row("unitarity")
        assert gen.residual <= 1e-9, (fx.label, gen.residual)
        assert unit.residual <= 1e-10, (fx.label, unit.residual)
        worst_gen = max(worst_gen, gen.residual)
        worst_unit = max(worst_unit, unit.residual)
    _passline(
        "criterion 2 (generating identity)",
        f"max residual {worst_gen:.2e}, max unitarity defect {worst_unit:.2e}",
    )


def test_criterion_03_dilation_identities(fixtures):
    worst_inter = worst_defect = 0.0
    for fx in fixtures:
        inter = fx.report.row("intertwine_mz").residual
        assert inter <= 1e-13, (fx.label, inter)
        worst_inter = max(worst_inter, inter)

        hat_t = tuples.hat(fx.t, 3)
        orders = [hardy.nilpotency_order(m) or CAP for m in hat_t.ops]
        cap = max(orders) if fx.r_scale == 1.0 else CAP
        pi = hardy.canonical_isometry(hat_t, fx.cert.defect, fx.cert.d_frame, cap)
        rho = max(tuples.spectral_radius(m) for m in hat_t.ops)
        bound = 1e-10 if fx.r_scale == 1.0 else hardy.tail_tolerance(rho, cap, np.sqrt(fx.t.dim))
        for idx in range(fx.t.dim):
            h = np.zeros(fx.t.dim)
            h[idx] = 1.0
            defect = abs(pi.isometry_defect(h))
            assert defect <= bound, (fx.label, defect, bound)
            worst_defect = max(worst_defect, defect)
    _passline(
        "criterion 3 (dilation identities)",
        f"max coordinate-shift residual {worst_inter:.2e}, max isometry defect {worst_defect:.2e}",
    )


def test_criterion_04_commutant_lifting(fixtures):
    worst = worst_swing = 0.0
    for fx in fixtures:
        lift = fx.report.row("lifting")
        assert lift.residual <= max(1e-9, lift.bound), (fx.label, lift.residual, lift.bound)
        order = list(reversed(range(fx.realization.dim_e + fx.realization.dim_f)))
        permuted = rz.build_generating_unitary(fx.t, fx.cert, completion_order=order)
        res2, _ = rz.lifting_residual(fx.t, fx.cert, permuted, fx.report.cap)
        swing = abs(res2 - lift.residual)
        assert swing <= 1e-9, (fx.label, swing)
        worst = max(worst, lift.residual)
        worst_swing = max(worst_swing, swing)
    _passline(
        "criterion 4 (commutant lifting)",
        f"max residual {worst:.2e}, max completion swing {worst_swing:.2e}",
    )


def test_criterion_05_identity_suite(fixtures):
    worst = 0.0
    worst_strict = 0.0
    for fx in fixtures:
        for name in ("block_pullback_shifted", "block_pullback_plain", "adjoint_monomial", "colligation_pullback", "defect_embedding"):
            res = fx.report.row(name).residual
            assert res <= 1e-10, (fx.label, name, res)
            worst = max(worst, res)
        strict_row = fx.report.row("strict_multiplier")
        assert strict_row.residual <= strict_row.bound, (fx.label, strict_row.residual, strict_row.bound)
        worst_strict = max(worst_strict, strict_row.residual)
    _passline(
        "criterion 5 (exact identity suite)",
        f"max exact-identity residual {worst:.2e}, max strict-multiplier residual {worst_strict:.2e}",
    )


def test_criterion_06_schur_identity(fixtures):
    worst = 0.0
    for fx in fixtures:
        res = fx.report.row("schur_identity").residual
        assert res <= 1e-9, (fx.label, res)
        worst = max(worst, res)
    _passline(
        "criterion 6 (Schur identity)",
        f"max residual over 100 interior points per fixture {worst:.2e}",
    )


def test_criterion_07_innerness(fixtures):
    worst = 0.0
    for fx in fixtures:
        dev = fx.report.row("inner_deviation").residual
        frac = fx.report.row("inner_singular_fraction").residual
        assert dev <= 1e-7, (fx.label, dev)
        assert frac < 0.01, (fx.label, frac)
        worst = max(worst, dev)
    _passline(
        "criterion 7 (innerness)",
        f"max boundary deviation {worst:.2e} on the {GRID}x{GRID} grid",
    )


def _random_poly(rng) -> vn.MultiPoly:
    exponents = [k for k in itertools.product(range(4), repeat=3) if sum(k) <= 3]
    terms = {}
    for _ in range(int(rng.integers(1, 7))):
        k = exponents[int(rng.integers(0, len(exponents)))]
        terms[k] = complex(rng.standard_normal(), rng.standard_normal())
    if not terms:
        terms = {(0, 0, 0): 1.0}
    return vn.multipoly(3, terms)


def test_criterion_08_von_neumann(fixtures):
    worst_margin = np.inf
    for fi, fx in enumerate(fixtures):
        started = time.perf_counter()
        cache = vn.precompute_torus(fx.realization, GRID)
        split = vn.split_transfer(fx.realization)
        rng = np.random.default_rng(VN_SEED + fi)
        for _ in range(VN_POLYS):
            poly = _random_poly(rng)
            report = vn.vn_check(
                poly,
                fx.t,
                fx.cert,
                grid=GRID,
                realization=fx.realization,
                cache=cache,
                split=split,
            )
            assert report.margin >= -1e-7, (fx.label, poly.terms, report.margin)
            assert report.rhs <= report.polydisc_sup + 1e-9, (
                fx.label,
                report.rhs,
                report.polydisc_sup,
            )
            worst_margin = min(worst_margin, report.margin)
        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, (fx.label, elapsed)
    _passline(
        "criterion 8 (von Neumann)",
        f"{VN_POLYS} seeded polynomials per fixture, worst margin {worst_margin:.3e}",
    )


def test_criterion_09_pure_tn_refinement(fixtures):
    for fx in fixtures:
        rho = tuples.spectral_radius(fx.t.op(3))
        split = vn.split_transfer(fx.realization)
        assert rho < 1.0
        assert split.h0_dim == 0, (fx.label, split.h0_dim)
        assert vn.pure_tn_refinement(fx.t, fx.cert, fx.realization)
    _passline(
        "criterion 9 (pure last coordinate)",
        "every fixture with a pure last coordinate has an empty product component",
    )


def test_criterion_10_oracle_equivalence():
    rng = np.random.default_rng(VN_SEED)
    worst_defect = 0.0
    for n in (2, 3, 4):
        for _ in range(5):
            t = generators.random_candidate(int(rng.integers(0, 2**31)), 4, n)
            via_product = tuples.conjugacy_product(t.ops, np.eye(t.dim))
            res = matcore.operator_norm(via_product - tuples.szego_defect(t))
            assert res <= 1e-12, (n, res)
            worst_defect = max(worst_defect, res)
    worst_vieta = 0.0
    for degree in (3, 4):
        for _ in range(25):
            coeffs = np.concatenate(
                [[1.0], rng.standard_normal(degree) + 1j * rng.standard_normal(degree)]
            )
            roots = matcore.poly_roots(coeffs)
            recon = np.array([1.0 + 0.0j])
            for root in roots:
                recon = np.convolve(recon, np.array([1.0, -root], dtype=complex))
            err = float(np.max(np.abs(recon - coeffs)))
            assert err <= 1e-8, (degree, err)
            worst_vieta = max(worst_vieta, err)
    _passline(
        "criterion 10 (oracle equivalence)",
        f"defect-route agreement {worst_defect:.2e}, Vieta reconstruction {worst_vieta:.2e}",
    )
