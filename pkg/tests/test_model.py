import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from availbound import model as M
from availbound.errors import (ExponentTooSmall, HazardBoundViolated, InvalidState,
                               InvalidTable, LambdaNotDominating, RepairTailViolated)
from availbound.model import ModelParams, Regime, SystemState, validate
from availbound.rng import generator


def canonical_raw(**kw):
    raw = {"K1": 4, "K2": 4, "Lambda": 5, "work_family": "pareto_hazard", "repair_family": "pareto"}
    raw.update(kw)
    return raw


def hazard_table():
    s = np.array([0.0, 0.5, 1.0, 2.0, 4.0, 8.0])
    lam = np.array([4.5, 3.5, 3.0, 2.0, 1.5, 1.0])
    return np.column_stack([s, lam]).tolist()


def repair_table():
    s = np.array([0.0, 0.25, 0.25, 0.5, 1.0, 2.0, 4.0])
    F = np.array([0.0, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999])
    return np.column_stack([s, F]).tolist()


def test_canonical_accepted():
    m = validate(canonical_raw())
    assert m.is_pareto and m.K1 == 4 and m.limiting_availability() == 0.5


def test_exponent_too_small():
    with pytest.raises(ExponentTooSmall):
        validate(canonical_raw(K1=3))
    with pytest.raises(ExponentTooSmall):
        validate(canonical_raw(K2=2.5))


def test_lambda_must_dominate():
    with pytest.raises(LambdaNotDominating):
        validate(canonical_raw(Lambda=4))


def test_hazard_above_cap_rejected():
    t = hazard_table()
    t[0][1] = 6.0
    with pytest.raises(HazardBoundViolated):
        validate(canonical_raw(work_family="tabulated_hazard", work_table=t))


def test_hazard_below_envelope_rejected():
    t = hazard_table()
    t[2][1] = 1.0  # K1/(1+1) = 2
    with pytest.raises(HazardBoundViolated):
        validate(canonical_raw(work_family="tabulated_hazard", work_table=t))


def test_repair_tail_rejected():
    t = repair_table()
    t[4][1] = 0.93  # below 1 - 2**-4
    with pytest.raises(RepairTailViolated):
        validate(canonical_raw(repair_family="tabulated_cdf", repair_table=t))


def test_bad_tables():
    with pytest.raises(InvalidTable):
        validate(canonical_raw(work_family="tabulated_hazard"))
    with pytest.raises(InvalidTable):
        validate(canonical_raw(work_family="weibull"))
    with pytest.raises(InvalidTable):
        M.TabulatedHazardLaw([0.0, 1.0, 0.5], [4, 3, 2], 4)


def test_csv_table(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("s,lambda\n" + "".join(f"{s},{v}\n" for s, v in hazard_table()))
    m = validate(canonical_raw(work_family="tabulated_hazard", work_csv=str(p)))
    assert m.work.nodes[-1] == 8.0


def test_pareto_values():
    m = ModelParams.pareto()
    assert m.cdf(1, 1.0) == pytest.approx(0.9375, abs=1e-15)
    assert m.residual_cdf(1, 0.0, 0.7) == pytest.approx(m.cdf(1, 0.7), abs=1e-15)
    assert m.residual_cdf(1, 3.0, 1e12) == pytest.approx(1.0, abs=1e-12)
    assert m.work.residual_inverse(2.0, 0.0) == 0.0


def test_availability_asymmetric():
    m = ModelParams.pareto(K2=5)
    assert m.mean_work() == pytest.approx(1 / 3)
    assert m.mean_repair() == pytest.approx(1 / 4)
    assert m.limiting_availability() == pytest.approx(4 / 7, abs=1e-15)


def test_system_state():
    z = SystemState.parse("1:0")
    assert z.regime is Regime.WORKING and z.elapsed == 0.0 and str(z) == "1:0.0"
    assert Regime.WORKING.other is Regime.REPAIR
    with pytest.raises((ValueError, InvalidState)):
        SystemState(1, -1.0)


def test_tabulated_repair_atom_state_rejected():
    m = validate(canonical_raw(repair_family="tabulated_cdf",
                               repair_table=[[0, 0], [0.5, 0.95], [1.0, 1.0]]))
    with pytest.raises(InvalidState):
        m.check_state(SystemState(2, 2.0))


def test_working_time_mean():
    rng = generator(1, "mean-test")
    u = rng.random(1_000_000)
    xi = (1 - u) ** (-1 / 4) - 1
    se = xi.std() / np.sqrt(xi.size)
    assert abs(xi.mean() - 1 / 3) < 3 * se


def test_residual_samples_ks():
    m = ModelParams.pareto()
    rng = generator(2, "residual-ks")
    xs = np.array([m.sample_residual(1, 2.0, rng) for _ in range(100_000)])
    assert stats.kstest(xs, lambda s: m.residual_cdf(1, 2.0, s)).pvalue > 0.01


def test_equilibrium_sample():
    m = ModelParams.pareto()
    rng = generator(3, "eq")
    draws = [m.equilibrium_sample(rng) for _ in range(100_000)]
    work = np.array([d.regime == 1 for d in draws])
    assert abs(work.mean() - 0.5) < 3 * 0.5 / np.sqrt(work.size)
    el = np.array([d.elapsed for d in draws])
    assert stats.kstest(el, lambda x: 1 - (1 + x) ** -3.0).pvalue > 0.01


def test_equilibrium_regime_frequency_million():
    m = ModelParams.pareto()
    u = generator(4, "eq-regime").random(1_000_000)
    assert abs(np.mean(u < m.limiting_availability()) - 0.5) < 3 * 0.5 / 1000


@pytest.fixture(scope="module")
def tabulated():
    return validate(canonical_raw(work_family="tabulated_hazard", work_table=hazard_table(),
                                  repair_family="tabulated_cdf", repair_table=repair_table()))


def test_tabulated_residual_consistency(tabulated):
    for j in (1, 2):
        law = tabulated.law(j)
        for x in (0.0, 0.3, 1.7, 9.0):
            s = np.linspace(0, 12, 61)
            direct = law.residual_cdf(x, s)
            ratio = 1 - law.survival(x + s) / law.survival(x)
            assert np.max(np.abs(direct - ratio)) < 1e-12


def test_envelopes(tabulated):
    s = np.linspace(0, 50, 2001)
    for m in (ModelParams.pareto(), tabulated):
        assert np.all(m.cdf(1, s) >= 1 - (1 + s) ** -m.K1 - 1e-12)
        assert np.all(m.cdf(2, s) >= 1 - (1 + s) ** -m.K2 - 1e-12)
    f = tabulated.pdf_work(s)
    assert np.all(f > 4 * np.exp(-5 * s) / (1 + s))
    assert np.all(f < 5 / (1 + s) ** 4)


def test_tabulated_work_sampling_ks(tabulated):
    rng = generator(5, "tab-ks")
    for x in (0.0, 1.3):
        xs = np.array([tabulated.sample_residual(1, x, rng) for _ in range(20_000)])
        assert stats.kstest(xs, lambda s: tabulated.residual_cdf(1, x, s)).pvalue > 0.01


def test_tabulated_repair_sampling_with_atom(tabulated):
    # KS is not valid with an atom; compare the empirical CDF pointwise instead
    rng = generator(6, "tab-atom")
    n = 50_000
    xs = np.array([tabulated.sample(2, rng) for _ in range(n)])
    for s in (0.1, 0.2499, 0.25, 0.4, 1.0, 3.0, 6.0):
        F = float(tabulated.cdf(2, s))
        sd = np.sqrt(max(F * (1 - F), 1e-12) / n)
        assert abs(np.mean(xs <= s) - F) < 4 * sd + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 12), st.floats(0.0, 0.9999))
def test_tabulated_inverse_matches_bisection(x, u):
    tab = validate(canonical_raw(work_family="tabulated_hazard", work_table=hazard_table(),
                                 repair_family="tabulated_cdf", repair_table=repair_table()))
    from availbound.numerics import invert_monotone
    for law in (tab.work, tab.repair):
        if law.survival(x) <= 0:
            continue
        ref = invert_monotone(lambda s: float(law.residual_cdf(x, s)), u, 0.0, 1.0, tol=1e-13)
        assert abs(law.residual_inverse(x, u) - ref) < 1e-9


def test_atom_sampled_at_jump(tabulated):
    law = tabulated.repair
    assert law.residual_inverse(0.0, 0.75) == pytest.approx(0.25, abs=1e-10)


def test_tabulated_means_by_quadrature(tabulated):
    from scipy import integrate
    for j in (1, 2):
        law = tabulated.law(j)
        ref, _ = integrate.quad(lambda s: float(law.survival(s)), 0, np.inf, limit=400,
                                points=None)
        assert law.mean() == pytest.approx(ref, rel=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 20), st.floats(0, 50), st.floats(3.1, 9))
def test_pareto_residual_is_cdf(x, s, K):
    law = M.ParetoLaw(K)
    v = law.residual_cdf(x, s)
    assert 0.0 <= v <= 1.0
    assert law.residual_cdf(x, s + 1.0) >= v


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 20), st.floats(0.0, 0.999999))
def test_pareto_inverse_roundtrip(x, u):
    law = M.ParetoLaw(4.0)
    s = law.residual_inverse(x, u)
    assert abs(law.residual_cdf(x, s) - u) < 1e-9
