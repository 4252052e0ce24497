import numpy as np
import pytest

from dkrotor.classical import (
    CHAOS_THRESHOLD,
    ClassicalEnsemble,
    classical_diffusion,
    classical_evolve,
    classical_step,
)
from dkrotor.model import DriveSchedule, SystemParams


def test_step_zero_strength_is_pure_drift():
    ens = ClassicalEnsemble(
        theta=np.array([0.3, 1.0]), p=np.array([2.0, -1.0]), rng_seed=0
    )
    out = classical_step(ens, K=0.0, tau=0.5)
    assert np.allclose(out.p, ens.p)
    assert np.allclose(out.theta, np.mod(ens.theta + ens.p * 0.5, 2 * np.pi))


def test_step_single_trajectory_hand_values():
    ens = ClassicalEnsemble(theta=np.array([np.pi / 2]), p=np.array([0.0]), rng_seed=0)
    out = classical_step(ens, K=10.0, tau=1.0)
    assert out.p[0] == pytest.approx(10.0, abs=1e-12)
    assert out.theta[0] == pytest.approx((np.pi / 2 + 10.0) % (2 * np.pi), abs=1e-12)


def test_step_rejects_negative_arguments():
    ens = ClassicalEnsemble.uniform(1000, seed=1)
    with pytest.raises(ValueError):
        classical_step(ens, K=-1.0, tau=1.0)
    with pytest.raises(ValueError):
        classical_step(ens, K=1.0, tau=-1.0)


def test_mean_momentum_stays_zero():
    # uniform angles: <sin> = 0, so <p> drifts only by sampling noise
    ens = ClassicalEnsemble.uniform(200_000, seed=2)
    out = classical_step(ens, K=10.0, tau=0.5)
    sigma = 10.0 / np.sqrt(2 * ens.p.size)
    assert abs(np.mean(out.p)) < 3 * sigma


def test_evolve_uses_quantum_timeline():
    params = SystemParams(K=3.0, M=8)
    sched = DriveSchedule(r=1.0, lambda0=0.25, N=5)
    ens = ClassicalEnsemble.uniform(2000, seed=3)
    kicks, p2 = classical_evolve(ens, sched, params)
    assert kicks.size == 10  # two kicks per period
    assert np.all(np.diff(kicks) == 1.0)
    assert np.all(p2 >= 0)


def test_diffusion_seed_reproducibility():
    a = classical_diffusion(10.0, ensemble_size=5000, seed=42)
    b = classical_diffusion(10.0, ensemble_size=5000, seed=42)
    assert a.d_per_period == b.d_per_period
    c = classical_diffusion(10.0, ensemble_size=5000, seed=43)
    assert c.d_per_period != a.d_per_period
    # different seed agrees within quoted error at 3 sigma
    err = np.hypot(a.stat_error_per_period, c.stat_error_per_period)
    assert abs(c.d_per_period - a.d_per_period) < 3 * err + 1e-12


def test_diffusion_subchaotic_flag():
    est = classical_diffusion(1.0, ensemble_size=2000, seed=1)
    assert est.warnings and "KAM" in est.warnings[0]


def test_diffusion_needs_big_ensemble():
    with pytest.raises(ValueError):
        classical_diffusion(10.0, ensemble_size=10, seed=0)


def test_diffusion_chaotic_magnitude():
    est = classical_diffusion(10.0, ensemble_size=30_000, seed=7)
    # quasilinear estimate K^2/2 per kick; the doubly-kicked value per
    # base period (two kicks) sits near it
    assert 0.7 * 50.0 < est.d_per_period < 1.3 * 50.0
    assert est.d_per_kick == pytest.approx(est.d_per_period / 2.0)
    assert est.stat_error_per_period > 0


def test_diffusion_independent_of_ratio():
    base = classical_diffusion(10.0, ensemble_size=40_000, seed=11)
    off = classical_diffusion(
        10.0,
        schedule=DriveSchedule(r=1.01, lambda0=0.5, N=30),
        ensemble_size=40_000,
        seed=11,
    )
    err = np.hypot(base.stat_error_per_period, off.stat_error_per_period)
    assert abs(base.d_per_period - off.d_per_period) < 3 * err


def test_chaos_threshold_constant():
    assert CHAOS_THRESHOLD == 5.0


def test_quantum_short_time_matches_classical():
    # over the first couple of periods the quantum rotor diffuses like the
    # classical ensemble under the same drive
    import dkrotor as dk

    params = SystemParams(K=10.0, M=128)
    psi0 = dk.init_state(params, "delta")
    sched = DriveSchedule(r=1.0, lambda0=0.5, N=2)
    res = dk.evolve_quasiperiodic(psi0, sched, params, check_edges=False)
    quantum = res.records[-1].p2 * params.kbar**2
    ens = ClassicalEnsemble.uniform(200_000, seed=1)
    _, classical = classical_evolve(ens, sched, params)
    assert abs(quantum / classical[-1] - 1.0) < 0.3
