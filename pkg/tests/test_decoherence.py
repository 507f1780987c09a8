import math

import numpy as np
import pytest
from scipy import integrate

from gaussian_decoherence import decoherence as dc
from gaussian_decoherence import model as mdl
from gaussian_decoherence import propagation as prop
from gaussian_decoherence.hormander import DF, filtration

from conftest import scenario_models

WINDOW_GRID = np.geomspace(1e-3, 1e-2, 24)


def cat_of(dz):
    dz = np.asarray(dz, dtype=float)
    return mdl.CatCoherence(0.5 * dz, -0.5 * dz)


# -- coefficients -------------------------------------------------------------------------------

def test_d_coefficient_examples():
    fp = mdl.scenario_free_particle()
    assert dc.d_coefficient(fp, 0, [0, 2]) == pytest.approx(4.0)
    assert dc.d_coefficient(fp, 1, [1, 0]) == pytest.approx(1 / 3)
    assert dc.d_coefficient(fp, 1, [2, 0]) == pytest.approx(4 / 3)
    for m in scenario_models().values():
        assert dc.d_coefficient(m, 0, np.zeros(m.dim)) == 0.0
    with pytest.raises(ValueError):
        dc.d_coefficient(fp, -1, [1, 0])


def test_d_coefficient_matrix_form():
    m = scenario_models()["chain3_end"]
    dz = np.array([0.3, -1.0, 0.5, 0.2, 0.0, 0.7])
    for j in range(3):
        x = np.linalg.matrix_power(m.F, j) @ dz
        expected = x @ m.omega @ m.M @ m.omega.T @ x / ((2 * j + 1) * math.factorial(j) ** 2)
        assert dc.d_coefficient(m, j, dz) == pytest.approx(expected, rel=1e-12)


def test_leading_taylor_examples():
    fp = filtration(mdl.scenario_free_particle())
    assert dc.leading_taylor(mdl.scenario_free_particle(), fp, [1, 0]) == (0, pytest.approx(1.0))
    assert dc.leading_taylor(mdl.scenario_free_particle(), fp, [0, 1]) == (1, pytest.approx(1 / 3))
    pq = mdl.scenario_pq()
    assert dc.leading_taylor(pq, filtration(pq), [0, 1]) == (DF, 0.0)


def test_predict_examples():
    fp = mdl.scenario_free_particle()
    f = filtration(fp)
    p = dc.predict(fp, f, mdl.CatCoherence([0, 1], [0, -1]))
    assert p.j == 0 and p.d == pytest.approx(4.0)
    p = dc.predict(fp, f, mdl.CatCoherence([1, 0], [-1, 0]))
    assert p.j == 1 and p.d == pytest.approx(4 / 3)
    pq = mdl.scenario_pq()
    p = dc.predict(pq, filtration(pq), mdl.CatCoherence([1, 0], [-1, 0]))
    assert p.j == DF and p.d == 0.0 and "no decay" in p.law
    p = dc.predict(fp, f, mdl.CatCoherence([1, 1], [1, 1]))
    assert p.j == DF and p.d == 0.0


def test_predict_mass_dependence():
    # d_1 for dz = (dp, 0) is Lambda dp^2 / (3 m^2)
    m = mdl.scenario_free_particle(2.0, 1.0)
    p = dc.predict(m, filtration(m), cat_of([1.0, 0.0]))
    assert p.j == 1 and p.d == pytest.approx(1 / 12)


# -- exact HS norm ----------------------------------------------------------------------------------

def test_hs_norm_initial():
    for m in scenario_models().values():
        cat = mdl.CatCoherence(np.ones(m.dim), -np.ones(m.dim))
        assert abs(dc.hs_norm_cat(m, cat, 0.0) - 1.0) <= 1e-12


def test_hs_norm_damped_closed_form():
    c = math.e - 1
    expected = math.sqrt(math.exp(-1) / (1 + 2 * c) * math.exp(-c / (1 + 2 * c)))
    got = dc.hs_norm_cat(mdl.scenario_damped_oscillator(), cat_of([1.0, 0.0]), 1.0)
    assert got == pytest.approx(expected, abs=1e-12)
    assert got == pytest.approx(0.23726, abs=1e-5)


def hs_norm_by_quadrature(model, cat, t):
    # ||rho||^2 = (2 pi hbar)^-n int |chi_t(xi)|^2 dxi
    ch = prop.channel_at(model, t)
    f = lambda q, p: abs(prop.cat_term_characteristic(ch, cat, np.array([p, q]))) ** 2
    val, _ = integrate.dblquad(f, -12, 12, -12, 12, epsabs=1e-13, epsrel=1e-11)
    return math.sqrt(val / (2 * math.pi * model.hbar))


@pytest.mark.parametrize("name, dz, t", [
    ("damped_oscillator", [1.0, 0.0], 1.0),
    ("damped_oscillator", [0.5, -1.0], 0.3),
    ("free_particle", [1.0, 2.0], 0.7),
    ("pq", [0.0, 1.0], 0.5),
])
def test_exact_prefactor_against_quadrature(name, dz, t):
    m = scenario_models()[name]
    cat = cat_of(dz)
    assert dc.hs_norm_cat(m, cat, t, prefactor="exact") == pytest.approx(hs_norm_by_quadrature(m, cat, t), rel=1e-7)


def test_prefactors_agree_when_trace_free():
    m = mdl.scenario_pq()
    cat = cat_of([0.3, 1.0])
    assert dc.hs_norm_cat(m, cat, 0.8) == pytest.approx(dc.hs_norm_cat(m, cat, 0.8, prefactor="exact"), rel=1e-12)
    with pytest.raises(ValueError):
        dc.hs_norm_cat(m, cat, 0.8, prefactor="other")
    with pytest.raises(ValueError):
        dc.hs_norm_cat(m, cat, -0.1)


def test_diagonal_term_series():
    m = mdl.scenario_damped_oscillator()
    s = dc.decay_series(m, mdl.CatCoherence([1.0, 0.0], [1.0, 0.0]), [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(s.neg2hbar_log, 0.0)
    for t, h in zip(s.t[1:], s.hs_norm[1:]):
        C = prop.c_form(m, t)
        assert h**2 == pytest.approx(abs(np.linalg.det(prop.flow(m, t))) / math.sqrt(np.linalg.det(np.eye(2) + 2 * C)))


def test_free_particle_short_time_law():
    m = mdl.scenario_free_particle()
    ts = np.linspace(0.005, 0.05, 10)
    s = dc.decay_series(m, mdl.CatCoherence([0, 1], [0, -1]), ts)
    np.testing.assert_allclose(s.hs_norm, np.exp(-2 * ts), rtol=0.05)
    # dz-dependent exponent is 4 Lambda t (1 + O(t))
    np.testing.assert_allclose(s.neg2hbar_log / (4 * ts), 1.0, atol=3 * ts.max())


def test_pq_direction_dependence():
    m = mdl.scenario_pq()
    ts = [0.0, 0.1, 0.5, 1.0]
    decays = dc.decay_series(m, cat_of([0.0, 1.0]), ts)
    frozen = dc.decay_series(m, cat_of([1.0, 0.0]), ts)
    assert np.all(np.diff(decays.neg2hbar_log) > 0)
    assert np.max(np.abs(frozen.neg2hbar_log)) < 1e-30


def test_coherence_exponent_matches_raw_ratio():
    # stable quadrature vs ln of the ratio of two norms
    for name in ("damped_oscillator", "chain3_end", "quadratic_potential"):
        m = scenario_models()[name]
        dz = np.linspace(-1, 1, m.dim)
        for t in (0.05, 0.5):
            raw = -2 * m.hbar * math.log(dc.hs_norm_cat(m, cat_of(dz), t) / dc.hs_norm_cat(m, cat_of(0 * dz), t))
            assert dc.coherence_exponent(m, dz, t) == pytest.approx(raw, rel=1e-9)


def test_coherence_forms_match_c_form():
    m = scenario_models()["chain4_site2"]
    w = np.arange(1.0, 9.0)
    f = dc.coherence_forms(m, w, 0.7)
    C = prop.c_form(m, 0.7)
    np.testing.assert_allclose(f.C, C, rtol=1e-10, atol=1e-14)
    assert f.C_w == pytest.approx(w @ C @ w, rel=1e-10)
    assert f.Ct_w == pytest.approx(w @ prop.c_tilde(m, 0.7) @ w, rel=1e-9)


@pytest.mark.parametrize("name", list(scenario_models()))
def test_c_tilde_leading_order(name):
    m = scenario_models()[name]
    K = 0.0
    for t in np.linspace(1e-3, 0.1, 25):
        C, Ct = prop.c_form(m, t), prop.c_tilde(m, t)
        for xi in np.eye(m.dim):
            c = xi @ C @ xi
            if c > 1e-14:
                K = max(K, abs(xi @ Ct @ xi - c) / (t * c))
    print(f"{name}: fitted K = {K:.4f}")
    assert 0 < K < 10


@pytest.mark.parametrize("name", list(scenario_models()))
def test_monotone_decay(name):
    m = scenario_models()[name]
    f = filtration(m)
    for xi in np.eye(m.dim):
        dz = m.omega.T @ xi
        if dc.predict(m, f, cat_of(dz)).j == DF:
            continue
        hs = [dc.hs_norm_cat(m, cat_of(dz), t) for t in np.linspace(0, 3, 61)]
        assert np.all(np.diff(hs) <= 1e-15)


# -- fits -----------------------------------------------------------------------------------------

@pytest.mark.parametrize("dz, slope, coeff", [([0, 2], 1, 4.0), ([2, 0], 3, 4 / 3)])
def test_fit_free_particle(dz, slope, coeff):
    s = dc.decay_series(mdl.scenario_free_particle(), cat_of(dz), WINDOW_GRID)
    fit = dc.fit_exponent(s)
    assert abs(fit.slope - slope) <= 0.05
    assert fit.coefficient == pytest.approx(coeff, rel=0.02)
    assert not fit.df_consistent


def test_straight_line_fit_is_biased():
    s = dc.decay_series(mdl.scenario_free_particle(), cat_of([0, 2]), WINDOW_GRID)
    bare = dc.fit_exponent(s, remainder=False)
    full = dc.fit_exponent(s)
    assert abs(full.coefficient / 4 - 1) < abs(bare.coefficient / 4 - 1)
    assert bare.remainder is None and full.remainder is not None


def test_fit_df_direction():
    m = scenario_models()["chain3_middle"]
    cat = cat_of([1, 0, 0, 0, -1, 0])
    s = dc.decay_series(m, cat, WINDOW_GRID)
    assert np.max(np.abs(s.neg2hbar_log)) < 1e-10
    # same statement through the raw norms, normalised by the diagonal term
    ratio = s.hs_norm / dc.decay_series(m, cat_of(np.zeros(6)), WINDOW_GRID).hs_norm
    assert np.max(-np.log(ratio)) < 1e-10
    fit = dc.fit_exponent(s)
    assert fit.df_consistent and fit.coefficient == 0.0 and math.isnan(fit.slope)


def test_fit_window_validation():
    s = dc.decay_series(mdl.scenario_free_particle(), cat_of([0, 2]), WINDOW_GRID)
    with pytest.raises(ValueError, match="outside"):
        dc.fit_exponent(s, (1e-4, 1e-2))
    with pytest.raises(ValueError, match="invalid"):
        dc.fit_exponent(s, (1e-2, 1e-3))
    short = dc.decay_series(mdl.scenario_free_particle(), cat_of([0, 2]), np.geomspace(1e-3, 1e-2, 5))
    with pytest.raises(ValueError, match="8 points"):
        dc.fit_exponent(short)


def test_series_validation():
    with pytest.raises(ValueError):
        dc.decay_series(mdl.scenario_free_particle(), cat_of([0, 2]), [0.1, 0.05])


def test_default_grid_covers_window():
    g = dc.default_t_grid(0.02, 10)
    assert g[0] == 0.0 and g[-1] == 0.02 and np.all(np.diff(g) > 0)
    assert np.sum((g >= 1e-3) & (g <= 1e-2)) >= 16


def test_prediction_report_flags():
    m = mdl.scenario_free_particle()
    cat = cat_of([2, 0])
    pred = dc.predict(m, filtration(m), cat)
    rep = dc.prediction_report(pred, dc.fit_exponent(dc.decay_series(m, cat, WINDOW_GRID)))
    assert set(rep) == {"j", "d", "law_string", "fit_slope", "fit_coeff", "agreement_flags"}
    assert rep["agreement_flags"] == {"df_consistent": False, "slope_ok": True, "coeff_ok": True,
                                      "prediction_matches": True}
    wrong = dc.DecayPrediction(0, 1.0)
    rep = dc.prediction_report(wrong, dc.fit_exponent(dc.decay_series(m, cat, WINDOW_GRID)))
    assert rep["agreement_flags"]["prediction_matches"] is False
    assert dc.prediction_report(pred, None)["agreement_flags"] == {}


def test_write_decay_csv(tmp_path):
    s = dc.decay_series(mdl.scenario_free_particle(), cat_of([0, 2]), [0.0, 0.1])
    path = tmp_path / "d.csv"
    dc.write_decay_csv(path, s)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,hs_norm,neg2hbar_log"
    assert [float(v) for v in lines[1].split(",")] == [0.0, 1.0, 0.0]
