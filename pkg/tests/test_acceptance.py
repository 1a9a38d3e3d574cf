"""One test per acceptance criterion; each prints a PASS/FAIL line in the summary."""
import math
import time

import numpy as np
import pytest

from bmround.banach_mazur import coset_deviation, minimize_ratio, stretch_bound, stretch_bound_derivative
from bmround.cli import main
from bmround.ellipse_field import NormField, ellipse_to_beltrami, field_to_beltrami
from bmround.envelopes import ELL_MIN, M_env, envelope_derivatives, john_ellipse, m_env, verify_lemma1
from bmround.geometry import Ellipse, inclusion_gauges, lp_ball, validate
from bmround.modulus import CurveFamily, compare_moduli, discrete_modulus, build_grid
from bmround.sampling import batch_bodies

from conftest import ACCEPTANCE_LINES
from oracles import ENV_AT_MIN, LINF_AXIS_RATIO, LINF_DIAG_RATIO, RECT_MU, SQRT2, singular_ratio

BATCH_SEED = 42
BATCH_SIZE = 500


def record(number: int, checks: dict, detail: str) -> None:
    failed = [name for name, ok in checks.items() if not ok]
    status = "PASS" if not failed else "FAIL (" + ", ".join(failed) + ")"
    ACCEPTANCE_LINES.append(f"criterion {number}: {status}; {detail}")
    assert not failed, failed


@pytest.fixture(scope="module")
def lemma1_batch():
    bodies = batch_bodies(BATCH_SEED, BATCH_SIZE)
    start = time.perf_counter()
    rows = []
    for body in bodies:
        res = minimize_ratio(body)
        rows.append((res, verify_lemma1(body, res, tol=1e-4)))
    return bodies, rows, time.perf_counter() - start


def test_criterion_1_square_sharpness(capsys):
    start = time.perf_counter()
    code = main(["rho", "--body", "square"])
    out = dict(line.split(": ", 1) for line in capsys.readouterr().out.strip().splitlines())
    sq = lp_ball(math.inf)
    res = minimize_ratio(sq)
    rep = verify_lemma1(sq, res)
    elapsed = time.perf_counter() - start
    checks = {
        "exit code": code == 0,
        "rho": abs(float(out["rho"]) - SQRT2) <= 1e-6,
        "T* identity": singular_ratio(res.T_star) - 1 <= 1e-6,
        "area 2": abs(rep.area - 2.0) <= 1e-6,
        "lower equality": abs(rep.area - 2.0) <= 1e-6 and rep.lower_ok,
        "upper equality": abs(4 * rep.ell**2 - rep.area) <= 1e-6 and rep.upper_ok,
        "runtime": elapsed < 5,
    }
    record(1, checks, f"rho={float(out['rho']):.12f} area={rep.area:.12f} ell={rep.ell:.12f} {elapsed:.2f}s")


def test_criterion_2_envelope_identities():
    start = time.perf_counter()
    ell = np.linspace(ELL_MIN, 1.0, 10**6)
    upper_slack = float(np.min(4 * ell**2 - M_env(ell)))
    lower_slack = float(np.min(m_env(ell) - 2.0))
    probe = np.linspace(ELL_MIN + 1e-3, 1 - 1e-3, 1000)
    h = 1e-6
    dM, dm = envelope_derivatives(probe)
    fd_M = (M_env(probe + h) - M_env(probe - h)) / (2 * h)
    fd_m = (m_env(probe + h) - m_env(probe - h)) / (2 * h)
    fd_err = float(max(np.max(np.abs(dM - fd_M)), np.max(np.abs(dm - fd_m))))
    elapsed = time.perf_counter() - start
    checks = {
        "M(min)": M_env(ELL_MIN) == ENV_AT_MIN,
        "m(min)": m_env(ELL_MIN) == ENV_AT_MIN,
        "M <= 4 ell^2": upper_slack >= -1e-10,
        "m >= 2": lower_slack >= -1e-10,
        "derivatives": fd_err <= 1e-7,
        "runtime": elapsed < 5,
    }
    record(2, checks, f"slacks {upper_slack:.2e}/{lower_slack:.2e} fd error {fd_err:.2e} {elapsed:.2f}s")


def test_criterion_3_lemma1_batch(lemma1_batch):
    _, rows, elapsed = lemma1_batch
    rhos = np.array([res.rho for res, _ in rows])
    checks = {
        "envelope_ok": all(rep.envelope_ok for _, rep in rows),
        "rho range": bool(np.all((rhos >= 1.0) & (rhos <= SQRT2 + 1e-6))),
        "certified": all(res.certified for res, _ in rows),
        "runtime": elapsed < 60,
    }
    record(3, checks, f"{len(rows)} bodies, rho in [{rhos.min():.6f}, {rhos.max():.6f}] {elapsed:.1f}s")


def test_criterion_4_uniqueness_batch():
    start = time.perf_counter()
    worst, used, seen = 0.0, 0, 0
    for body in batch_bodies(7, 60):
        seen += 1
        res = minimize_ratio(body, restarts=5, seed=seen)
        if res.rho <= 1.001:
            continue
        Ts = res.restarts
        worst = max([worst] + [coset_deviation(A, B) for k, A in enumerate(Ts) for B in Ts[k + 1:]])
        used += 1
        if used == 20:
            break
    elapsed = time.perf_counter() - start
    checks = {"20 bodies": used == 20, "deviation": worst <= 1e-3, "runtime": elapsed < 60}
    record(4, checks, f"{used} bodies x 5 restarts, max deviation {worst:.2e} {elapsed:.1f}s")


def test_criterion_5_stretch_derivative():
    rng = np.random.default_rng(5)
    h = 1e-5
    worst, negative = 0.0, True
    for _ in range(100):
        ell = rng.uniform(ELL_MIN, 0.999)
        theta = rng.uniform(0, (math.pi - math.acos(ell)) / 2)
        assert 2 * theta + math.acos(ell) < math.pi
        fd = (stretch_bound(1 + h, ell, theta) - stretch_bound(1 - h, ell, theta)) / (2 * h)
        d = stretch_bound_derivative(1.0, ell, theta)
        worst = max(worst, abs(d - fd) / abs(fd))
        negative &= bool(d < 0)
    record(5, {"relative error": worst < 1e-6, "negative": negative}, f"100 pairs, max relative error {worst:.2e}")


def test_criterion_6_dilatation_factors(lemma1_batch):
    bodies, rows, _ = lemma1_batch
    K_O = np.array([rep.K_O_factor for _, rep in rows])
    K_I = np.array([rep.K_I_factor for _, rep in rows])
    inner, outer = 0.0, 0.0
    for body in bodies:
        e_in_a, a_in_e = inclusion_gauges(john_ellipse(body), body)
        inner = max(inner, e_in_a)
        outer = max(outer, a_in_e)
    checks = {
        "K_O": float(K_O.max()) <= math.pi / 2 + 1e-6,
        "K_I": float(K_I.max()) <= 4 / math.pi + 1e-6,
        "product": float((K_O * K_I).max()) <= 2 + 1e-6,
        "E in A": inner <= 1 + 1e-6,
        "A in sqrt2 E": outer <= SQRT2 + 1e-6,
    }
    detail = (
        f"max K_O {K_O.max():.9f} K_I {K_I.max():.9f} product {(K_O * K_I).max():.9f}"
        f"; gauges {inner:.9f}/{outer:.9f}"
    )
    record(6, checks, detail)


def test_criterion_7_modulus():
    start = time.perf_counter()
    euclid = NormField.constant(Ellipse(1.0, 1.0))
    left_right = CurveFamily.from_spec({"source": "left", "sink": "right"})
    values = {n: discrete_modulus(build_grid(euclid, n), left_right).value for n in (16, 32, 64, 128)}
    errors = [abs(v - 1.0) for v in values.values()]
    linf = NormField.constant(lp_ball(math.inf))
    axis = compare_moduli(linf, left_right, 64).ratio
    diag = compare_moduli(linf, CurveFamily.from_spec({"source": "sw", "sink": "ne", "domain": "diamond"}), 64).ratio
    others = [
        compare_moduli(linf, CurveFamily.from_spec(spec), 32).ratio
        for spec in (
            {"source": "bottom", "sink": "top", "connectivity": "axis"},
            {"source": "nw", "sink": "se", "domain": "diamond"},
            {"source": {"arc": [2.5, 3.8]}, "sink": {"arc": [-0.6, 0.6]}},
            {"source": "bottom", "sink": {"arc": [1.2, 1.9]}},
        )
    ]
    ratios = [axis, diag] + others
    lo, hi = 2 / math.pi - 0.06, 4 / math.pi + 0.06
    elapsed = time.perf_counter() - start
    checks = {
        "euclidean n=64": abs(values[64] - 1.0) <= 0.05,
        # 2e-4 is the relative accuracy certified by the default feasibility tolerance
        "monotone refinement": all(b <= a + 2e-4 for a, b in zip(errors, errors[1:])),
        "axis ratio": abs(axis - LINF_AXIS_RATIO) <= 0.06,
        "diagonal ratio": abs(diag - LINF_DIAG_RATIO) <= 0.06,
        "band": all(lo <= r <= hi for r in ratios),
        "runtime": elapsed < 300,
    }
    detail = (
        "euclid " + " ".join(f"{v:.6f}" for v in values.values())
        + f"; axis {axis:.6f} diag {diag:.6f}; others " + " ".join(f"{r:.4f}" for r in others)
        + f"; {elapsed:.1f}s"
    )
    record(7, checks, detail)


def test_criterion_8_beltrami():
    square_mu = field_to_beltrami(NormField.constant(lp_ball(math.inf)))[0, 0]
    rect = validate([[2, 1], [-2, 1], [-2, -1], [2, -1]])
    rect_mu = field_to_beltrami(NormField.constant(rect))[0, 0]
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        b = rng.uniform(0.1, 2.0)
        E = Ellipse(b * rng.uniform(1.0, 10.0), b, rng.uniform(0, math.pi))
        alpha = rng.uniform(-math.pi, math.pi)
        F = Ellipse(E.semi_major, E.semi_minor, E.angle + alpha)
        worst = max(worst, abs(ellipse_to_beltrami(F) - ellipse_to_beltrami(E) * np.exp(2j * alpha)))
    checks = {
        "square mu = 0": square_mu == 0,
        "rectangle mu": abs(rect_mu - RECT_MU) <= 1e-6,
        "rotation": worst <= 1e-9,
    }
    record(8, checks, f"square {square_mu}, rectangle {rect_mu:.9f}, rotation error {worst:.2e}")
