import math

import numpy as np
import pytest

from dkrotor.model import DriveSchedule, QuantumState, SystemParams, TruncationError, init_state
from dkrotor.propagator import (
    build_kick_timeline,
    evolve_quasiperiodic,
    free_apply,
    kick_apply,
    period_apply,
)


def random_state(M, seed=0, beta=0.0):
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(2 * M + 1) + 1j * rng.standard_normal(2 * M + 1)
    amps /= np.linalg.norm(amps)
    return QuantumState(amps, beta=beta)


def bessel_series(order, x, terms=20):
    """Plain power-series Bessel J_order(x), the independent oracle."""
    total = 0.0
    for s in range(terms):
        total += (-1) ** s * (x / 2.0) ** (order + 2 * s) / (
            math.factorial(s) * math.factorial(order + s)
        )
    return total


def test_zero_strength_kick_is_identity():
    params = SystemParams(M=16, K=3.0)
    state = random_state(16, seed=1)
    out = kick_apply(state, 0.0, params)
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-15)


def test_kick_bessel_amplitudes():
    params = SystemParams(M=32, kbar=2.0)
    state = init_state(params, "delta")
    out = kick_apply(state, params.kbar * 1.0, params)  # strength/kbar = 1
    j0 = bessel_series(0, 1.0)
    assert abs(out.amplitudes[32]) == pytest.approx(abs(j0), abs=1e-12)
    # full Bessel kernel: a(m) = (-i)^m J_m(1)
    for m in (1, 2, 3, 5):
        expected = bessel_series(m, 1.0)
        assert abs(out.amplitudes[32 + m]) == pytest.approx(abs(expected), abs=1e-12)
        phase = out.amplitudes[32 + m] / ((-1j) ** m)
        assert phase.imag == pytest.approx(0.0, abs=1e-12)


def test_kick_preserves_norm():
    params = SystemParams(M=64, kbar=1.3)
    state = random_state(64, seed=2)
    out = kick_apply(state, 17.3, params)
    assert abs(out.norm() - 1.0) < 1e-13


def test_free_identity_cases():
    params = SystemParams(M=16, kbar=2 * np.pi)
    state = random_state(16, seed=3)
    out = free_apply(state, 0.0, params)
    assert np.allclose(out.amplitudes, state.amplitudes)
    # kbar = 2 pi, tau = 2: phases exp(-i 2 pi m^2) = 1 (quantum resonance)
    out = free_apply(state, 2.0, params)
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-12)


def test_free_leaves_zero_momentum_alone():
    params = SystemParams(M=8, kbar=1.234)
    state = init_state(params, "delta")
    out = free_apply(state, 0.7321, params)
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-15)


def test_period_reduces_to_free_at_zero_strength():
    params = SystemParams(M=16, K=0.0, kbar=1.7)
    state = random_state(16, seed=4)
    via_period = period_apply(state, 0.37, params)
    via_free = free_apply(state, 1.0, params)
    assert np.allclose(via_period.amplitudes, via_free.amplitudes, atol=1e-13)


def test_period_halves_compose_at_symmetric_offset():
    params = SystemParams(M=32, K=10.0, kbar=2.0)
    state = random_state(32, seed=5)
    whole = period_apply(state, 0.5, params)
    half = kick_apply(state, params.K, params)
    half = free_apply(half, 0.5, params)
    half = kick_apply(half, params.K, params)
    half = free_apply(half, 0.5, params)
    assert np.allclose(whole.amplitudes, half.amplitudes, atol=1e-13)


def test_period_against_dense_matrix_oracle():
    # independent construction: explicit DFT matrices, dense products
    M, K, kbar, lam = 16, 2.0, 1.0, 0.3
    params = SystemParams(M=M, K=K, kbar=kbar)
    n = 2 * M + 1
    m = np.arange(-M, M + 1)
    theta = 2 * np.pi * np.arange(n) / n
    F = np.exp(1j * np.outer(theta, m)) / np.sqrt(n)  # momentum -> angle
    kick_mat = F.conj().T @ np.diag(np.exp(-1j * (K / kbar) * np.cos(theta))) @ F
    free_mat = lambda tau: np.diag(np.exp(-1j * kbar * m**2 * tau / 2.0))
    U = free_mat(1 - lam) @ kick_mat @ free_mat(lam) @ kick_mat
    state = random_state(M, seed=6)
    expected = U @ state.amplitudes
    out = period_apply(state, lam, params)
    assert np.max(np.abs(out.amplitudes - expected)) < 1e-10


def test_evolution_matches_repeated_periods_at_unit_ratio():
    params = SystemParams(M=64, K=10.0)
    psi0 = init_state(params, "delta")
    sched = DriveSchedule(r=1.0, lambda0=0.37, N=5)
    res = evolve_quasiperiodic(psi0, sched, params, check_edges=False)
    state = psi0
    for _ in range(5):
        state = period_apply(state, 0.37, params)
    assert np.max(np.abs(res.final_state.amplitudes - state.amplitudes)) < 1e-10
    assert len(res.records) == 5


def test_norm_conserved_over_long_run():
    params = SystemParams(M=256, K=10.0)
    psi0 = init_state(params, "delta")
    sched = DriveSchedule(r=1.00111, lambda0=0.25, N=150)
    res = evolve_quasiperiodic(psi0, sched, params)
    assert abs(res.final_state.norm() - 1.0) < 1e-11


def test_time_reversal_returns_initial_state():
    params = SystemParams(M=64, K=8.0)
    psi0 = init_state(params, "gaussian", width=2.0)
    lam = 0.41
    state = psi0
    for _ in range(10):
        state = period_apply(state, lam, params)
    # adjoint sequence: conjugated factors in reverse order
    for _ in range(10):
        state = free_apply(state, -(1 - lam), params)
        state = kick_apply(state, -params.K, params)
        state = free_apply(state, -lam, params)
        state = kick_apply(state, -params.K, params)
    assert np.max(np.abs(state.amplitudes - psi0.amplitudes)) < 1e-9


def test_coincident_kicks_merge_into_double_strength():
    params = SystemParams(M=64, K=4.0)
    sched = DriveSchedule(r=1.0, lambda0=0.0, N=3)
    events, merged = build_kick_timeline(sched, params)
    assert len(merged) == 3
    assert all(ev.strength == pytest.approx(8.0) for ev in events)
    psi0 = init_state(params, "delta")
    res = evolve_quasiperiodic(psi0, sched, params, check_edges=False)
    assert res.flags and "merged" in res.flags[0]
    # equivalent single-train rotor with strength 2K
    state = psi0
    for _ in range(3):
        state = kick_apply(state, 2 * params.K, params)
        state = free_apply(state, 1.0, params)
    assert np.max(np.abs(res.final_state.amplitudes - state.amplitudes)) < 1e-12


def test_kick_times_sorted_and_increasing():
    params = SystemParams(M=32, K=5.0)
    sched = DriveSchedule(r=1.003, lambda0=0.7, N=50)
    events, _ = build_kick_timeline(sched, params)
    times = [ev.time for ev in events]
    assert all(b > a for a, b in zip(times, times[1:]))


def test_truncation_abort():
    params = SystemParams(M=8, K=10.0)
    psi0 = init_state(params, "delta")
    sched = DriveSchedule(r=1.0, lambda0=0.5, N=10)
    with pytest.raises(TruncationError):
        evolve_quasiperiodic(psi0, sched, params)


def test_finite_pulse_norm_and_delta_limit():
    params = SystemParams(M=64, K=2.0, pulse_width=0.001, substeps=16)
    # low-momentum state: the free phases accumulated inside the pulse
    # (~ kbar m^2 pw) stay small, so the delta-kick limit applies
    state = init_state(params, "gaussian", width=2.0)
    out = period_apply(state, 0.5, params)
    assert abs(out.norm() - 1.0) < 1e-12
    sharp = period_apply(state, 0.5, SystemParams(M=64, K=2.0))
    assert np.max(np.abs(out.amplitudes - sharp.amplitudes)) < 0.02


def test_finite_pulse_overlap_rejected():
    params = SystemParams(M=32, K=2.0, pulse_width=0.2, substeps=4)
    state = random_state(32, seed=9)
    with pytest.raises(ValueError):
        period_apply(state, 0.1, params)


def test_finite_pulse_quasiperiodic_runs():
    params = SystemParams(M=64, K=3.0, pulse_width=0.01, substeps=4)
    psi0 = init_state(params, "delta")
    sched = DriveSchedule(r=1.001, lambda0=0.4, N=20)
    res = evolve_quasiperiodic(psi0, sched, params, check_edges=False)
    assert len(res.records) == 20
    assert abs(res.final_state.norm() - 1.0) < 1e-11


def test_classical_limit_small_kbar():
    # small effective Planck constant: quantum spreading approaches the
    # classical ensemble over the first few periods
    from dkrotor.classical import ClassicalEnsemble, classical_evolve

    params = SystemParams(K=10.0, kbar=0.25, M=512)
    psi0 = init_state(params, "delta")
    sched = DriveSchedule(r=1.0, lambda0=0.5, N=5)
    res = evolve_quasiperiodic(psi0, sched, params, check_edges=False)
    quantum = res.records[-1].p2 * params.kbar**2
    ens = ClassicalEnsemble.uniform(200_000, seed=0)
    _, classical = classical_evolve(ens, sched, params)
    assert abs(quantum / classical[-1] - 1.0) < 0.2
