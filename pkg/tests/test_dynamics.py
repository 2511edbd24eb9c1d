import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.linalg import expm

from cradle.chains import build_chain, chain_to_jacobi
from cradle.dynamics import (
    State,
    analytic_trajectory,
    conservation_report,
    evolve_analytic,
    integrate_ode,
    mirror_reversal_check,
    mirror_reversal_error,
    modal_model,
    predicted_revival,
    pulse,
    revival_deformed_fixed_fixed,
    revival_deformed_free_free,
    revival_mirror_fixed_fixed,
    revival_mirror_free_free,
    verify_fractional_revival,
    verify_perfect_transfer,
)
from cradle.exceptions import NoRevivalPossible, StepTooLarge
from cradle.spectral import ChainParams, spectrum


def expm_momenta(chain, state, t):
    """Exact propagator of the linear system, independent of any eigenbasis."""
    A = chain_to_jacobi(chain).matrix()
    n = chain.n_sites
    G = np.block([[np.zeros((n, n)), np.eye(n)], [-A, np.zeros((n, n))]])
    y = expm(G * t) @ np.concatenate([state.q, state.p])
    return y[:n], y[n:]


def ff(N, c, **kw):
    return ChainParams(N + 1, "free-free", 0, c, **kw)


# -- analytic evolution ------------------------------------------------------


def test_time_zero_is_identity():
    chain = build_chain(ff(5, F(1, 4)))
    _, spec, basis = modal_model(chain)
    start = State(0.0, np.linspace(-1, 1, 6), np.cos(np.arange(6)))
    out = evolve_analytic(basis, spec, start, 0.0)
    np.testing.assert_allclose(out.q, start.q, atol=1e-14)
    np.testing.assert_allclose(out.p, start.p, atol=1e-14)


def test_two_mass_closed_form():
    chain = build_chain(ff(1, F(1, 2), omega_tilde=2))
    _, spec, basis = modal_model(chain)
    w1 = spec.omegas[1]
    for t in np.linspace(0, 7, 15):
        p = evolve_analytic(basis, spec, pulse(2), t).p
        np.testing.assert_allclose(p, [(1 + math.cos(w1 * t)) / 2, (1 - math.cos(w1 * t)) / 2],
                                   atol=1e-14)


def test_translation_mode_drifts_linearly():
    chain = build_chain(ff(3, F(1, 4)))
    _, spec, basis = modal_model(chain)
    out = evolve_analytic(basis, spec, pulse(4), 10.0)
    # centre of mass moves with the total momentum: sum sqrt(m) q grows as t * p_bar sqrt(m_0)
    sqrt_m = np.sqrt(chain.masses)
    com = np.sum(sqrt_m * out.q) / np.sum(chain.masses)
    assert com == pytest.approx(10.0 * sqrt_m[0] / np.sum(chain.masses), rel=1e-12)


@pytest.mark.parametrize(
    "params",
    [ff(4, F(1, 4)), ff(7, F(3, 8), alpha=F(1, 3)), ChainParams.fixed_fixed(6, -1, 3, 4),
     ChainParams.fixed_fixed(9, 1, 3, 8, alpha=F(3, 4))],
)
def test_analytic_matches_matrix_exponential(params):
    chain = build_chain(params)
    _, spec, basis = modal_model(chain)
    rng = np.random.default_rng(3)
    start = State(0.0, rng.standard_normal(params.n_sites), rng.standard_normal(params.n_sites))
    for t in (0.3, 2.0, 11.7):
        q, p = expm_momenta(chain, start, t)
        out = evolve_analytic(basis, spec, start, t)
        np.testing.assert_allclose(out.q, q, atol=1e-10)
        np.testing.assert_allclose(out.p, p, atol=1e-10)


@pytest.mark.parametrize("N", [1, 4, 9, 12])
def test_full_period_returns_initial_state(N):
    for params in (ff(N, F(1, 2)), ff(N, F(3, 4)), ChainParams.fixed_fixed(N + 1, 1, 1, 4)):
        chain = build_chain(params)
        _, spec, basis = modal_model(chain)
        out = evolve_analytic(basis, spec, pulse(N + 1), 2 * spec.t_star)
        np.testing.assert_allclose(out.p, pulse(N + 1).p, atol=1e-8)
        if params.boundary.value == "fixed-fixed":
            np.testing.assert_allclose(out.q, 0, atol=1e-8)


def test_full_period_against_ode():
    chain = build_chain(ff(6, F(1, 2)))
    t2 = 2 * spectrum(chain.params).t_star
    traj = integrate_ode(chain, pulse(7), t2)
    np.testing.assert_allclose(traj.p[-1], pulse(7).p, atol=1e-6)


# -- ODE integrator ----------------------------------------------------------


def test_zero_state_stays_zero():
    chain = build_chain(ChainParams.fixed_fixed(5, 1, 1, 4))
    traj = integrate_ode(chain, State(0.0, np.zeros(5), np.zeros(5)), 3.0)
    assert not np.any(traj.q) and not np.any(traj.p)


def test_step_too_large():
    chain = build_chain(ff(8, F(1, 4)))
    w_max = math.sqrt(spectrum(chain.params).lambdas[-1])
    with pytest.raises(StepTooLarge):
        integrate_ode(chain, pulse(9), 1.0, dt=0.1 / w_max)
    integrate_ode(chain, pulse(9), 1.0, dt=0.099 / w_max)


def test_order_validation():
    chain = build_chain(ff(2, F(1, 2)))
    with pytest.raises(ValueError):
        integrate_ode(chain, pulse(3), 1.0, order=3)


@pytest.mark.parametrize("order,expected", [(2, 2), (4, 4)])
def test_convergence_order(order, expected):
    chain = build_chain(ff(5, F(1, 4)))
    t_end = 5.0
    exact = expm_momenta(chain, pulse(6), t_end)[1]
    errs = []
    for dt in (0.02, 0.01):
        errs.append(np.max(np.abs(integrate_ode(chain, pulse(6), t_end, dt=dt, order=order).p[-1] - exact)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(expected, abs=0.3)


@pytest.mark.parametrize("N", [2, 7, 12])
def test_ode_agrees_with_analytic(N):
    for params in (ff(N, F(1, 4)), ChainParams.fixed_fixed(N + 1, 1, 3, 8), ff(N, F(3, 4), alpha=F(1, 4))):
        chain = build_chain(params)
        t2 = 2 * spectrum(params).t_star
        traj = integrate_ode(chain, pulse(N + 1), t2, record_every=7)
        ref = analytic_trajectory(chain, pulse(N + 1), traj.t)
        assert np.max(np.abs(traj.p - ref.p)) < 1e-5
        assert conservation_report(traj).energy_drift < 1e-8


def test_free_free_momentum_conserved_every_step():
    chain = build_chain(ff(9, F(1, 8)))
    traj = integrate_ode(chain, pulse(10, masses=chain.masses), 30.0)
    total = traj.P.sum(axis=1)
    assert np.max(np.abs(total - total[0])) < 1e-10


def test_plain_leapfrog_misses_energy_target():
    # second-order leapfrog at the default step drifts ~1e-5 over [0, 2 t*]
    chain = build_chain(ff(9, F(1, 4)))
    t2 = 2 * spectrum(chain.params).t_star
    drift = conservation_report(integrate_ode(chain, pulse(10), t2, order=2)).energy_drift
    assert 1e-8 < drift < 1e-3


def test_analytic_trajectory_conserves_energy_exactly():
    chain = build_chain(ChainParams.fixed_fixed(10, 1, 1, 4, alpha=F(1, 3)))
    traj = analytic_trajectory(chain, pulse(10), np.linspace(0, 50, 301))
    assert conservation_report(traj).energy_drift < 1e-12


def test_trajectory_csv(tmp_path):
    chain = build_chain(ff(2, F(1, 2)))
    traj = analytic_trajectory(chain, pulse(3), [0.0, 0.5])
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_bytes().decode().split("\n")
    assert lines[0] == "t,p_0,p_1,p_2,P_0,P_1,P_2,E"
    row = [float(x) for x in lines[1].split(",")]
    assert row[:4] == pytest.approx([0.0, 1.0, 0.0, 0.0], abs=1e-14)
    assert row[-1] == pytest.approx(0.5, rel=1e-14)
    assert b"\r" not in path.read_bytes()


# -- perfect transfer --------------------------------------------------------


@pytest.mark.parametrize("N", range(1, 13))
@pytest.mark.parametrize("c", [F(1, 2), F(1, 4), F(3, 4), F(1, 8)])
def test_free_free_transfer(N, c):
    rep = verify_perfect_transfer(build_chain(ff(N, c)))
    assert rep.achieved and rep.sign == 1
    assert abs(rep.terminal_amplitudes[1] - 1) < 1e-8 and rep.residual < 1e-8


def test_deformed_free_free_does_not_transfer():
    rep = verify_perfect_transfer(build_chain(ff(6, F(1, 4), alpha=F(1, 4))))
    assert not rep.achieved
    np.testing.assert_allclose(rep.terminal_amplitudes, [0.5, math.sqrt(3) / 2], atol=1e-8)
    np.testing.assert_allclose(rep.expected_amplitudes, [0.5, math.sqrt(3) / 2], atol=1e-15)


@pytest.mark.parametrize("mu,rho,Z,sign", [(1, 1, 4, -1), (2, 1, 4, 1), (-1, 3, 4, -1), (2, 3, 8, 1)])
def test_fixed_fixed_transfer_sign(mu, rho, Z, sign):
    for N in (3, 6, 9):
        rep = verify_perfect_transfer(build_chain(ChainParams.fixed_fixed(N + 1, mu, rho, Z)))
        assert rep.achieved and rep.sign == sign == rep.expected_sign


def test_irrational_chain_has_no_transfer_time():
    rep = verify_perfect_transfer(build_chain(ff(4, 1 / math.sqrt(3), relaxed=True)))
    assert not rep.achieved and rep.t_star is None


# -- fractional revival ------------------------------------------------------


def test_quarter_revival_splits_evenly():
    rep = verify_fractional_revival(build_chain(ff(6, F(1, 4))))
    entry = rep.entries[1]
    np.testing.assert_allclose(entry.measured, [0.5, 0.5], atol=1e-8)
    assert entry.predicted == pytest.approx((0.5, 0.5), abs=1e-15)
    assert rep.passed and rep.nontrivial


def test_revival_at_zero_is_initial_state():
    for c in (F(1, 4), F(3, 8), F(5, 6)):
        rep = verify_fractional_revival(build_chain(ff(5, c)))
        assert rep.entries[0].measured == pytest.approx((1.0, 0.0), abs=1e-12)


def test_no_revival_for_half():
    chain = build_chain(ff(7, F(1, 2)))
    with pytest.raises(NoRevivalPossible):
        verify_fractional_revival(chain, require_revival=True)
    rep = verify_fractional_revival(chain)
    assert not rep.nontrivial and [e.ell for e in rep.entries] == [0, 1]
    # and at t*/2 the pulse is spread over the interior
    jac, spec, basis = modal_model(chain)
    mid = evolve_analytic(basis, spec, pulse(8), spec.t_star / 2).p
    assert np.max(np.abs(mid[1:-1])) > 0.1


def test_formulas_reduce_to_one_another():
    for ell in range(5):
        for c in (0.125, 0.375, 0.7):
            assert revival_deformed_free_free(c, ell, 0.5) == pytest.approx(
                revival_mirror_free_free(c, ell), abs=1e-10)
            assert revival_mirror_fixed_fixed(0.0, c, ell) == pytest.approx(
                revival_mirror_free_free(c, ell), abs=1e-10)
            assert revival_deformed_fixed_fixed(0.0, c, ell, 0.3) == pytest.approx(
                revival_deformed_free_free(c, ell, 0.3), abs=1e-10)
            for a in (0.1, -0.2):
                assert revival_deformed_fixed_fixed(a, c + a, ell, 0.5) == pytest.approx(
                    revival_mirror_fixed_fixed(a, c + a, ell), abs=1e-10)


def test_unit_sum_for_mirror_free_free():
    for c in (F(1, 4), F(3, 8), F(1, 8)):
        for e in verify_fractional_revival(build_chain(ff(8, c))).entries:
            assert sum(e.measured) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("alpha", [F(1, 2), F(1, 4), F(3, 4)])
@pytest.mark.parametrize(
    "params",
    [ff(6, F(1, 4)), ff(9, F(3, 8)), ChainParams.fixed_fixed(7, 1, 1, 4),
     ChainParams.fixed_fixed(10, 1, 3, 8), ChainParams.fixed_fixed(10, -3, 7, 8)],
)
def test_revival_matches_closed_forms(params, alpha):
    params = params.with_alpha(alpha)
    rep = verify_fractional_revival(build_chain(params))
    assert rep.passed, [(e.measured, e.predicted, e.residual) for e in rep.entries if not e.passed]
    for e in rep.entries:
        assert e.predicted == pytest.approx(predicted_revival(params, e.ell), abs=0)


def test_relaxed_rational_revival():
    # odd Z: no perfect transfer, but revival still happens at the tau_ell
    chain = build_chain(ff(6, F(1, 3), relaxed=True))
    assert not chain.params.perfect_transfer_possible
    assert verify_fractional_revival(chain).passed


def test_true_momentum_bookkeeping_deformed():
    alpha = F(1, 4)
    params = ff(7, F(3, 8), alpha=alpha)
    chain = build_chain(params)
    spec = spectrum(params)
    traj = analytic_trajectory(chain, pulse(8, masses=chain.masses), spec.tau)
    a = float(alpha)
    for ell, P in enumerate(traj.P):
        s2 = math.sin(ell * float(params.c) * math.pi) ** 2
        sm0 = math.sqrt(chain.masses[0])
        assert P[0] == pytest.approx((1 - 2 * a * s2) * sm0, abs=1e-8)
        assert P[-1] == pytest.approx(2 * a * s2 * sm0, abs=1e-8)
        assert P.sum() == pytest.approx(sm0, abs=1e-8)


def test_irrational_revival_disabled():
    with pytest.raises(NoRevivalPossible):
        verify_fractional_revival(build_chain(ff(4, 1 / math.sqrt(3), relaxed=True)))


# -- mirror reversal ---------------------------------------------------------


def test_mirror_reversal_two_bit_pattern():
    chain = build_chain(ff(9, F(1, 4)))
    start = State(0.0, np.zeros(10), np.r_[1.0, 1.0, np.zeros(8)])
    assert mirror_reversal_check(chain, start)
    _, spec, basis = modal_model(chain)
    out = evolve_analytic(basis, spec, start, spec.t_star)
    np.testing.assert_allclose(out.p, np.r_[np.zeros(8), 1.0, 1.0], atol=1e-8)


def test_mirror_reversal_pulse_is_transfer():
    chain = build_chain(ChainParams.fixed_fixed(8, 1, 1, 4))
    assert mirror_reversal_check(chain, pulse(8))
    assert verify_perfect_transfer(chain).achieved


@pytest.mark.parametrize("seed", range(10))
def test_mirror_reversal_random_against_expm(seed):
    rng = np.random.default_rng(seed)
    for params in (ff(9, F(3, 4)), ChainParams.fixed_fixed(10, 1, 3, 8)):
        chain = build_chain(params)
        start = State(0.0, rng.standard_normal(10), rng.standard_normal(10))
        assert mirror_reversal_error(chain, start) < 1e-8
        q, p = expm_momenta(chain, start, spectrum(params).t_star)
        sign = params.transfer_sign
        np.testing.assert_allclose(p, sign * start.p[::-1], atol=1e-8)


def test_mirror_reversal_needs_symmetric_chain():
    chain = build_chain(ff(9, F(1, 4), alpha=F(1, 4)))
    assert not mirror_reversal_check(chain, pulse(10))
