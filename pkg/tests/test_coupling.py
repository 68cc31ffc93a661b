import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from availbound import coupling, renewal
from availbound.bounds import BoundParams
from availbound.coupling import GenericKit, PairedState, ParetoKit
from availbound.errors import CapExceeded, InvalidWindow
from availbound.model import ModelParams, SystemState, validate
from availbound.rng import UniformStream, bit_generator

M = ModelParams.pareto()


def test_equal_ages_kit():
    kit = ParetoKit(4.0, 1.5, 1.5)
    s = np.linspace(0, 10, 41)
    assert kit.kappa == 1.0
    assert np.allclose(kit.Phi(s), M.work.residual_cdf(1.5, s), atol=1e-15)
    t1, t2 = kit.draw(0.7)
    assert t1 == t2


@pytest.mark.parametrize("x,y", [(0.0, 1.0), (2.0, 5.0), (5.0, 0.3), (0.0, 1e-6)])
def test_decomposition(x, y):
    kit = ParetoKit(4.0, x, y)
    assert kit.Phi(np.inf) + kit.Phi_hat(np.inf) == pytest.approx(1.0, abs=1e-15)
    for s in (0.0, 0.05, 0.3, 1.0, 4.0, 25.0):
        # Phi by direct quadrature of the pointwise min
        direct, _ = integrate.quad(lambda v: float(kit.phi(v)), 0, s, epsabs=1e-13, epsrel=1e-13,
                                   points=[kit.s_star] if kit.s_star < s else None, limit=200)
        assert abs(direct - float(kit.Phi(s))) < 1e-10
        assert abs(direct + float(kit.Phi_hat(s)) - M.work.residual_cdf(x, s)) < 1e-10


def test_kappa_matches_quadrature_oracle(oracles):
    for x, y, k in oracles["kappa_xy"]:
        assert abs(ParetoKit(4.0, x, y).kappa - k) < 1e-9


def test_densities_cross_once():
    kit = ParetoKit(4.0, 0.0, 2.0)
    f_young = lambda s: M.work.residual_pdf(0.0, s)
    f_old = lambda s: M.work.residual_pdf(2.0, s)
    ss = kit.s_star
    assert f_young(ss) == pytest.approx(f_old(ss), rel=1e-12)
    assert f_old(0.5 * ss) < f_young(0.5 * ss)
    assert f_young(2 * ss + 1) < f_old(2 * ss + 1)


@pytest.mark.parametrize("x,y", [(0.0, 1.0), (2.0, 5.0), (4.0, 0.5)])
def test_splice_statistics(x, y):
    n = 100_000
    t1, t2 = coupling.splice_draws(M, x, y, n, seed=11)
    kit = ParetoKit(4.0, x, y)
    assert stats.kstest(t1, lambda s: M.work.residual_cdf(x, s)).pvalue > 0.01
    assert stats.kstest(t2, lambda s: M.work.residual_cdf(y, s)).pvalue > 0.01
    freq = np.mean(t1 == t2)
    sd = math.sqrt(kit.kappa * (1 - kit.kappa) / n)
    assert abs(freq - kit.kappa) < 3 * sd


def test_sample_coupled_pair_uses_one_uniform():
    a = UniformStream(bit_generator(1, "x"))
    b = UniformStream(bit_generator(1, "x"))
    pair = coupling.sample_coupled_pair(M, 0.0, 1.0, a)
    assert pair == ParetoKit(4.0, 0.0, 1.0).draw(b.random())
    assert a.random() == b.random()


def test_generic_kit_agrees_with_pareto_kit():
    class Generic:
        nodes = (0.0, 1.0, 4.0, 10.0)
        residual_cdf = staticmethod(M.work.residual_cdf)
        residual_pdf = staticmethod(M.work.residual_pdf)
        residual_inverse = staticmethod(M.work.residual_inverse)
    for x, y in [(0.0, 1.0), (2.0, 5.0), (3.0, 0.2)]:
        g = GenericKit(Generic, x, y)
        p = ParetoKit(4.0, x, y)
        assert g.kappa == pytest.approx(p.kappa, abs=1e-12)
        for u in (0.01, 0.3, p.kappa - 1e-6, p.kappa + 1e-6, 0.95, 0.99999):
            a, b = g.draw(u), p.draw(u)
            assert a[0] == pytest.approx(b[0], rel=1e-9, abs=1e-10)
            assert a[1] == pytest.approx(b[1], rel=1e-9, abs=1e-10)


@pytest.fixture(scope="module")
def tabulated():
    return validate({"K1": 4, "K2": 4, "Lambda": 5, "work_family": "tabulated_hazard",
                     "work_table": [[0, 4.5], [0.5, 3.5], [1, 3.0], [2, 2.0], [4, 1.5], [8, 1.0]]})


def test_generic_kit_tabulated(tabulated):
    x, y = 0.2, 3.0
    kit = coupling.min_density_kit(tabulated, x, y)
    assert isinstance(kit, GenericKit)
    law = tabulated.work
    direct, _ = integrate.quad(lambda s: float(kit.phi(s)), 0, 60, limit=400,
                               points=sorted(set(np.r_[law.nodes, kit.bounds[1:-1]]) - {0.0}))
    assert kit.kappa == pytest.approx(direct + float(kit.Phi_hat(1e9) * 0), abs=2e-6)
    for s in (0.3, 1.0, 5.0):
        assert abs(float(kit.Phi(s)) + float(kit.Phi_hat(s)) - law.residual_cdf(x, s)) < 1e-12
    rng = UniformStream(bit_generator(3, "generic"))
    draws = np.array([kit.draw(rng.random()) for _ in range(8_000)])
    assert stats.kstest(draws[:, 0], lambda s: law.residual_cdf(x, s)).pvalue > 0.01
    assert stats.kstest(draws[:, 1], lambda s: law.residual_cdf(y, s)).pvalue > 0.01
    assert abs(np.mean(draws[:, 0] == draws[:, 1]) - kit.kappa) < 3 * math.sqrt(0.25 / 8_000)


def test_step_cases():
    rng = UniformStream(bit_generator(5, "steps"))
    same = PairedState(SystemState(2, 0.4), SystemState(2, 0.4))
    nxt = coupling.step_paired(M, same, rng)
    assert nxt.z1 == nxt.z2 == SystemState(1, 0.0) and nxt.coupled and nxt.clock > 0
    both_new = PairedState(SystemState(1, 0.0), SystemState(1, 0.0))
    assert coupling.step_paired(M, both_new, rng).z1 == SystemState(2, 0.0)
    mixed = PairedState(SystemState(1, 0.0), SystemState(2, 0.0))
    nxt = coupling.step_paired(M, mixed, rng)
    assert (nxt.z1.elapsed == 0.0) != (nxt.z2.elapsed == 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.floats(0, 5), st.integers(1, 2), st.floats(0, 5), st.integers(0, 10_000))
def test_absorption(m1, x1, m2, x2, seed):
    rng = UniformStream(bit_generator(seed, "absorb"))
    state = PairedState(SystemState(m1, x1), SystemState(m2, x2), (m1, x1) == (m2, x2))
    for _ in range(60):
        prev = state
        state = coupling.step_paired(M, state, rng)
        assert state.clock > prev.clock or state.clock == prev.clock
        if prev.coupled:
            assert state.coupled and state.z1 == state.z2


def test_coupling_time_edge_cases():
    rng = UniformStream(bit_generator(1, "edge"))
    z = SystemState(1, 0.7)
    assert coupling.coupling_time(M, z, z, rng) == 0.0
    with pytest.raises(CapExceeded):
        coupling.coupling_time(M, SystemState(1, 0.0), SystemState(2, 0.0),
                               UniformStream(bit_generator(3, "cap")), cap=1)


def test_coupling_time_matches_block_kernel():
    z1, z2 = SystemState(1, 0.0), SystemState(2, 0.0)
    sigma, events = coupling.coupling_times(M, z1, z2, 50, seed=9)
    from availbound.rng import bit_generator as bg
    for i in (0, 17, 49):
        rng = UniformStream(bg(9, f"coupling/{z1}/{z2}", i))
        assert coupling.coupling_time(M, z1, z2, rng) == sigma[i]


def test_paired_marginal_periods():
    periods = coupling.paired_cycle_lengths(M, SystemState(1, 0.0), SystemState(2, 0.0), 20_000, seed=4)
    for key, sample in periods.items():
        law = M.work if key.startswith("work") else M.repair
        assert sample.size == 20_000
        assert stats.kstest(sample, law.cdf).pvalue > 0.01


def test_first_component_regime_fraction_matches_renewal():
    n, t = 20_000, 1.0
    z1, z2 = SystemState(1, 0.0), SystemState(2, 0.0)
    working = 0
    for i in range(n):
        rng = UniformStream(bit_generator(21, "marginal", i))
        regime = 1
        for clock, m1, _, _, _ in coupling.paired_path(M, z1, z2, rng):
            if clock > t:
                break
            regime = m1
        working += regime == 1
    curve = renewal.availability_curve(M, z1, [t], n, seed=22)
    diff = working / n - curve.a_hat[0]
    assert abs(diff) < 3 * math.sqrt(2 * 0.25 / n)


def test_meet_rate_audit():
    rep = coupling.meet_rate_audit(M, BoundParams(2, 1, 3), 20_000, seed=5, theta0_mode="exact")
    assert rep.n_cycles >= 20_000
    assert rep.event_ok and rep.merge_ok
    assert rep.to_dict()["merge_scheme"]["freq"] >= rep.p


def test_audit_refuses_invalid_window():
    with pytest.raises(InvalidWindow):
        coupling.meet_rate_audit(M, BoundParams(2, 0.5, 3), 10, seed=1, theta0_mode="exact")


def test_coupling_stats_json():
    st_ = coupling.coupling_stats(M, SystemState(1, 0.0), SystemState(2, 0.0), 2.0, 500, seed=3,
                                  bound=1e10)
    d = st_.to_dict()
    assert d["moment"] >= 1 and d["moment_ci"][0] <= d["moment"] <= d["moment_ci"][1]
    assert d["moment_upper_ci_below_bound"] is True
    assert np.all(np.isfinite(st_.samples))
