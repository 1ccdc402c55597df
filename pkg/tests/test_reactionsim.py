"""Macroscopic bulk/surface reaction-diffusion time stepping."""

import numpy as np
import pytest

from stochom.errors import ContractError, ParameterError
from stochom.reactionsim import (
    MacroState,
    ReactionParams,
    diffusion_operator,
    masses,
    run,
    steady_residual,
    step,
)


def uniform_state(M=16, u0=1.0, U0=0.0, n=2):
    shape = (M,) * n
    return MacroState(n, M, 1.0, np.full(shape, u0), np.full(shape, U0))


def closed_form_linear(t, u0, U0, k, s, theta):
    """Exact solution of theta u' = -s k (u - U), U' = k (u - U)."""
    w0 = u0 - U0
    lam = k * (s / theta + 1.0)
    u = u0 - (s / (s + theta)) * w0 * (1.0 - np.exp(-lam * t))
    U = u - w0 * np.exp(-lam * t)
    return u, U


def test_params_validation():
    with pytest.raises(ParameterError):
        ReactionParams(family="cubic")
    with pytest.raises(ParameterError):
        ReactionParams(k=-1.0)
    with pytest.raises(ParameterError):
        ReactionParams(theta=0.0)
    with pytest.raises(ParameterError):
        ReactionParams(theta=1.2)
    with pytest.raises(ParameterError):
        ReactionParams(bc="robin")
    with pytest.raises(ParameterError):
        ReactionParams(dhom=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ContractError):
        MacroState(2, 8, 1.0, np.full((8, 8), np.nan), np.zeros((8, 8)))


def test_equilibrium_is_fixed_point():
    # u = U = const is stationary for linear exchange with f = 0
    state = uniform_state(u0=0.7, U0=0.7)
    params = ReactionParams(k=2.0, theta=0.5, s=1.5, dhom=np.eye(2))
    out = step(state, params, dt=0.1)
    assert np.allclose(out.u, 0.7, atol=1e-13)
    assert np.allclose(out.U, 0.7, atol=1e-13)


def test_mass_conservation_random_data():
    rng = np.random.default_rng(0)
    M = 16
    state = MacroState(2, M, 1.0, rng.random((M, M)), rng.random((M, M)))
    dhom = np.array([[2.0, 0.3], [0.3, 1.0]])
    params = ReactionParams(k=3.0, theta=0.4, s=2.0, dhom=dhom)
    total0 = masses(state, params)[2]
    _, ledger = run(state, params, dt=0.02, T=2.0)
    drift = max(abs(row.total_mass - total0) for row in ledger)
    assert drift <= 1e-12 * max(abs(total0), 1.0) * 2.0


def test_uniform_matches_closed_form():
    k, s, theta = 1.5, 0.8, 0.5
    state = uniform_state(u0=1.0, U0=0.2)
    params = ReactionParams(k=k, theta=theta, s=s, dhom=np.eye(2))
    snaps, _ = run(state, params, dt=1e-3, T=2.0, stride=200)
    for snap in snaps:
        u_ref, U_ref = closed_form_linear(snap.t, 1.0, 0.2, k, s, theta)
        assert abs(snap.u.mean() - u_ref) <= 1e-6
        assert abs(snap.U.mean() - U_ref) <= 1e-6
        assert snap.u.std() <= 1e-12  # uniform data stays uniform


def test_langmuir_equilibrium():
    # U* solves k1 u (Umax - U) = k2 U at the (spatially uniform) steady state
    params = ReactionParams(
        family="langmuir", k1=2.0, k2=1.0, U_max=1.0,
        theta=1.0, s=0.5, dhom=np.eye(2), time_weight=1.0,
    )
    state = uniform_state(u0=1.0, U0=0.0)
    snaps, _ = run(state, params, dt=0.05, T=60.0, stride=100000)
    u_inf = snaps[-1].u.mean()
    U_inf = snaps[-1].U.mean()
    assert abs(params.exchange(u_inf, U_inf)) <= 1e-9
    assert abs(U_inf - params.k1 * u_inf * params.U_max
               / (params.k2 + params.k1 * u_inf)) <= 1e-9


def test_positivity_preserved():
    rng = np.random.default_rng(3)
    M = 16
    state = MacroState(2, M, 1.0, 0.5 + 0.4 * rng.random((M, M)),
                       np.zeros((M, M)))
    params = ReactionParams(k=1.0, theta=0.8, s=1.0, dhom=0.1 * np.eye(2),
                            time_weight=1.0)
    snaps, _ = run(state, params, dt=0.05, T=5.0, stride=10)
    for snap in snaps:
        assert snap.u.min() > 0 and snap.U.min() >= 0


def test_dirichlet_decays_to_zero_steady_state():
    # homogeneous Dirichlet walls, no source: mass leaves the domain and the
    # backward-Euler iteration lands on the zero steady state
    rng = np.random.default_rng(1)
    M = 16
    state = MacroState(2, M, 1.0, rng.random((M, M)), rng.random((M, M)))
    params = ReactionParams(k=1.0, theta=1.0, s=0.5, dhom=np.eye(2),
                            bc="dirichlet", time_weight=1.0)
    snaps, ledger = run(state, params, dt=0.1, T=30.0, stride=1000)
    assert ledger[-1].total_mass <= 1e-8 * ledger[0].total_mass
    assert steady_residual(snaps[-1], params) <= 1e-6


def test_source_term_steady_state():
    # f > 0 with Dirichlet walls: u converges to the solution of
    # -div(D grad u) = theta f with g = 0 (U tracks u)
    M = 16
    state = uniform_state(M=M, u0=0.0, U0=0.0)
    params = ReactionParams(k=1.0, theta=0.5, s=1.0, dhom=np.eye(2), f=1.0,
                            bc="dirichlet", time_weight=1.0)
    snaps, _ = run(state, params, dt=0.25, T=80.0, stride=1000)
    final = snaps[-1]
    assert steady_residual(final, params) <= 1e-6
    # at steady state the exchange vanishes: U = u pointwise
    assert np.max(np.abs(final.u - final.U)) <= 1e-7


def test_strict_paper_mode_drops_porosity():
    state = uniform_state(u0=1.0, U0=0.0)
    params = ReactionParams(k=1.0, theta=0.5, s=1.0, dhom=np.eye(2),
                            include_porosity=False)
    # theta_eff = 1: dynamics match the theta = 1 run exactly
    ref = ReactionParams(k=1.0, theta=1.0, s=1.0, dhom=np.eye(2))
    a = step(state, params, dt=0.1)
    b = step(state, ref, dt=0.1)
    assert np.allclose(a.u, b.u) and np.allclose(a.U, b.U)


def test_diffusion_operator_row_sums():
    # Neumann operator conserves mass: column sums vanish
    A = diffusion_operator(2, 12, 1.0 / 12, np.array([[1.0, 0.2], [0.2, 2.0]]),
                           "neumann")
    colsum = np.asarray(np.abs(A.sum(axis=0))).max()
    assert colsum <= 1e-12
