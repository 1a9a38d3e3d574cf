import math

import numpy as np
import pytest

from bmround.banach_mazur import minimize_ratio
from bmround.envelopes import (
    ELL_MIN,
    M_env,
    default_tol,
    dilatation_factors,
    envelope_derivatives,
    john_ellipse,
    m_env,
    verify_lemma1,
)
from bmround.geometry import disk, inclusion_gauges, lp_ball, regular_polygon, validate
from bmround.sampling import batch_bodies

from oracles import ENV_AT_MIN, ENV_AT_ONE, SQRT2


def test_envelopes_at_endpoints():
    assert M_env(ELL_MIN) == ENV_AT_MIN
    assert m_env(ELL_MIN) == ENV_AT_MIN
    assert M_env(1.0) == pytest.approx(ENV_AT_ONE, abs=1e-15)
    assert m_env(1.0) == pytest.approx(ENV_AT_ONE, abs=1e-15)


def test_envelope_inequalities_on_dense_grid():
    ell = np.linspace(ELL_MIN, 1.0, 10**6)
    assert np.min(4 * ell**2 - M_env(ell)) >= -1e-10
    assert np.min(m_env(ell) - 2.0) >= -1e-10
    assert np.all(M_env(ell) >= m_env(ell) - 1e-12)


def test_envelope_derivatives_match_finite_differences():
    ell = np.linspace(ELL_MIN + 1e-3, 1 - 1e-3, 500)
    h = 1e-6
    dM, dm = envelope_derivatives(ell)
    np.testing.assert_allclose(dM, (M_env(ell + h) - M_env(ell - h)) / (2 * h), atol=1e-7)
    np.testing.assert_allclose(dm, (m_env(ell + h) - m_env(ell - h)) / (2 * h), atol=1e-7)
    assert np.all(dm >= 0)
    assert np.all(dM <= 8 * ell)


@pytest.mark.parametrize("bad", [0.5, 1.01, -1.0, math.nan])
def test_envelope_domain(bad):
    with pytest.raises(ValueError):
        M_env(bad)
    with pytest.raises(ValueError):
        m_env(bad)


def test_square_equalities():
    sq = lp_ball(math.inf)
    rep = verify_lemma1(sq, minimize_ratio(sq))
    assert rep.ell == pytest.approx(ELL_MIN, abs=1e-12)
    assert rep.area == pytest.approx(2.0, abs=1e-12)
    assert rep.lower_ok and rep.upper_ok and rep.envelope_ok
    assert rep.K_O_factor == pytest.approx(math.pi / 2)
    assert rep.K_I_factor == pytest.approx(4 / math.pi)


def test_disk_row():
    d = disk()
    rep = verify_lemma1(d, minimize_ratio(d))
    assert rep.ell == pytest.approx(1.0)
    assert rep.area == pytest.approx(math.pi, rel=1e-9)
    assert (rep.K_O_factor, rep.K_I_factor) == pytest.approx((1.0, 1.0), rel=1e-9)
    assert rep.envelope_ok


def test_batch_lemma1():
    for body in batch_bodies(42, 150):
        rep = verify_lemma1(body, minimize_ratio(body), tol=1e-6)
        assert rep.lower_ok and rep.upper_ok and rep.envelope_ok
        assert rep.m - 1e-6 <= rep.area <= rep.M + 1e-6
        assert rep.K_O_factor <= math.pi / 2 + 1e-6
        assert rep.K_I_factor <= 4 / math.pi + 1e-6


def test_suboptimal_map_leaves_domain():
    # the identity is far from optimal for a long rectangle
    body = validate([[4, 1], [-4, 1], [-4, -1], [4, -1]])
    from bmround.banach_mazur import RoundingResult

    fake = RoundingResult(np.eye(2), 17**0.5, 1.0, 17**0.5, (), (), False)
    rep = verify_lemma1(body, fake)
    assert not (rep.lower_ok or rep.upper_ok or rep.envelope_ok)


def test_default_tol():
    assert default_tol(lp_ball(math.inf)) == 1e-6
    assert default_tol(lp_ball(3)) == 1e-4


def test_john_ellipse_closed_forms():
    E = john_ellipse(lp_ball(math.inf))
    assert (E.semi_major, E.semi_minor) == pytest.approx((1.0, 1.0), abs=1e-6)
    R = john_ellipse(validate([[2, 1], [-2, 1], [-2, -1], [2, -1]]))
    assert (R.semi_major, R.semi_minor) == pytest.approx((2.0, 1.0), abs=1e-6)
    assert math.sin(R.angle) == pytest.approx(0.0, abs=1e-6)
    H = john_ellipse(regular_polygon(6))
    assert H.semi_major == pytest.approx(math.sqrt(3) / 2, abs=1e-6)


def test_john_inclusions():
    for body in batch_bodies(11, 40):
        E = john_ellipse(body)
        e_in_a, a_in_e = inclusion_gauges(E, body)
        assert e_in_a <= 1 + 1e-6
        assert a_in_e <= SQRT2 + 1e-6


def test_dilatation_factors():
    sq = lp_ball(math.inf)
    KO, KI = dilatation_factors(sq, np.eye(2))
    assert (KO, KI) == pytest.approx((math.pi / 2, 4 / math.pi))
    assert KO * KI == pytest.approx(2.0)
