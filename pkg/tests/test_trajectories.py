from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsnoise.ensemble import ChiBlock, evolve_series, spectrum_resolvent
from tlsnoise.model import AtomState, DensityMatrix, SystemParams, mixing_angle
from tlsnoise.sde import StepSizeError
from tlsnoise.trajectories import (COLLISION, EMISSION, DegenerateCorrelation, PhaseStatistics,
                                   TrajectoryRecord, check_jump_step, collision_rate,
                                   cos_correlation, emission_rate_constant, ensemble_density,
                                   interjump_phase_sum_drift, no_jump_propagator,
                                   phase_statistics, run_trajectories, run_trajectory,
                                   spectrum_from_trajectories, transient_time)

FIG1 = SystemParams.from_ratios(0.05, 5.0, 0.2)


def test_rates_and_step_guard():
    assert collision_rate(FIG1) == 2.5
    assert emission_rate_constant(FIG1) == pytest.approx(0.1)
    assert transient_time(FIG1) == pytest.approx(200.0)
    check_jump_step(FIG1, 0.002)
    with pytest.raises(StepSizeError):
        check_jump_step(FIG1, 0.01)


def test_no_jump_propagator_unitary_without_decay():
    p = SystemParams.from_ratios(0.0, 3.0, 1.0, 0.5)
    u = no_jump_propagator(p, 0.01)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-14)
    d = no_jump_propagator(FIG1, 0.01)
    assert np.linalg.norm(d @ np.array([0, 1.0])) < 1.0


def test_trajectory_frozen():
    r = run_trajectory(FIG1, 12345, 20.0, sample_every=500)
    assert r.amp_g[-1] == pytest.approx(-0.4468138937435982 + 0.5448795253853858j, rel=1e-12)
    assert r.amp_e[-1] == pytest.approx(-0.5545370005067969 + 0.4426650677909949j, rel=1e-12)
    assert r.phi[-1] == pytest.approx(0.2951769120077943, rel=1e-12)
    assert len(r.jump_times) == 47


@given(st.integers(0, 2**40), st.sampled_from([(5.0, 0.0), (0.0, 5.0), (5.0, 0.5), (0.0, 0.0)]))
@settings(max_examples=15, deadline=None)
def test_trajectory_invariants(seed, setting):
    G, L = setting
    p = SystemParams.from_ratios(0.05, G, L)
    r = run_trajectory(p, seed, 40.0, sample_every=10)
    assert np.allclose(np.abs(r.amp_g) ** 2 + np.abs(r.amp_e) ** 2, 1.0, atol=1e-12)
    assert np.all(np.diff(r.jump_times) >= 0)
    assert set(np.unique(r.jump_kinds)) <= {COLLISION, EMISSION}
    again = run_trajectory(p, seed, 40.0, sample_every=10)
    assert np.array_equal(r.amp_g, again.amp_g) and np.array_equal(r.jump_times, again.jump_times)
    if L == 0.0:
        assert np.all(r.phi == 0.0)


def test_emission_resets_to_ground():
    p = SystemParams.from_ratios(0.5)
    r = run_trajectory(p, 3, 50.0, sample_every=1)
    em = r.emission_times()
    assert len(em) > 3
    idx = np.searchsorted(r.times, em)
    assert np.all(np.isclose(r.times[idx], em))
    assert np.all(r.amp_e[idx] == 0)
    assert np.allclose(np.abs(r.amp_g[idx]), 1.0)


def test_collisions_flip_only_the_sign_of_a_ground_state_amplitude():
    p = SystemParams(rabi=1e-9, gamma=0.0, coll=2.0)
    r = run_trajectory(p, 8, 10.0, dt=0.005, sample_every=1)
    assert len(r.collision_times()) > 3
    assert np.allclose(np.abs(r.amp_g), 1.0)
    k = np.searchsorted(r.times, r.collision_times()[0] + 0.0025)
    assert r.amp_g[k].real == pytest.approx(-1.0, abs=1e-6)


def test_initial_state_and_phase():
    start = AtomState(0.6, 0.8j, phi=0.3, t=2.0)
    r = run_trajectory(FIG1, 1, 1.0, sample_every=100, initial=start)
    assert r.times[0] == 2.0
    assert r.amp_e[0] == pytest.approx(0.8j)
    assert r.phi[0] == 0.3


def test_parallel_runs_are_identical():
    a = run_trajectories(FIG1, 6, 10.0, master_seed=5, sample_every=50)
    b = run_trajectories(FIG1, 6, 10.0, master_seed=5, sample_every=50, workers=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.amp_g, y.amp_g) and np.array_equal(x.amp_e, y.amp_e)


def test_density_ensemble_frozen_and_close_to_ode():
    d = ensemble_density(FIG1, 50, [10.0], master_seed=3)
    assert d.rho_ee[0] == pytest.approx(0.243355684360323, rel=1e-12)
    assert d.chi1[0] == pytest.approx(0.038797084265343375 + 0.09124427273692827j, rel=1e-12)
    times = np.array([10.0, 40.0])
    big = ensemble_density(FIG1, 1500, times, master_seed=1, workers=2)
    ref = evolve_series(ChiBlock.from_density(FIG1, DensityMatrix.ground()), times)
    assert np.all(np.abs(big.rho_ee - ref[:, 3].real) <= 4 * big.rho_ee_err)
    assert np.all(np.abs(big.chi1.imag - ref[:, 0].imag) <= 4 * big.chi1_err_im)


def _record(times, dphi, sphi=None, jumps=(), kinds=(), params=FIG1, seed=0):
    times = np.asarray(times, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    sphi = np.zeros_like(dphi) if sphi is None else np.asarray(sphi, dtype=float)
    n = len(times)
    return TrajectoryRecord(times, np.ones(n, complex), np.zeros(n, complex), np.zeros(n),
                            np.asarray(jumps, float), np.asarray(kinds, np.int8), dphi, sphi,
                            np.ones(n, bool), params, seed, 0.01)


def test_histogram_binning_joins_plus_and_minus_pi():
    rec = _record([0, 1, 2, 3], [math.pi, -math.pi, -math.pi + 1e-12, 0.01])
    st_ = phase_statistics([rec], bins=64, t_discard=0.0)
    assert st_.counts[-1] == 2 and st_.counts[0] == 1 and st_.counts.sum() == 4 and st_.n_samples == 4


def test_mode_detection():
    edges = np.linspace(-math.pi, math.pi, 65)
    centers = 0.5 * (edges[1:] + edges[:-1])
    bimodal = (1000 + 3000 * np.exp(-centers ** 2 / 0.1)
               + 3000 * np.exp(-(np.abs(centers) - math.pi) ** 2 / 0.1)).astype(int)
    s = PhaseStatistics(edges, bimodal, np.zeros(1), np.zeros(1), int(bimodal.sum()))
    assert s.is_bimodal_zero_pi() and not s.is_unimodal_pi()
    flat = np.full(64, 1000)
    f = PhaseStatistics(edges, flat, np.zeros(1), np.zeros(1), 64000)
    assert len(f.modes()) == 0 and f.max_min_ratio() == 1.0


def test_cos_correlation_of_rotating_phase():
    t = np.arange(0, 400, 0.05)
    rec = _record(t, 0.7 * t, params=SystemParams.from_ratios(0.05))
    c = cos_correlation([rec], [0.0, 0.5, 1.0, 2.0], t_discard=0.0)
    assert c.values[0] == 1.0
    assert np.allclose(c.values, np.cos(0.7 * np.array([0.0, 0.5, 1.0, 2.0])), atol=0.02)
    with pytest.raises(ValueError):
        cos_correlation([rec], [0.03], t_discard=0.0)
    with pytest.raises(DegenerateCorrelation):
        cos_correlation([_record(t, np.zeros_like(t))], [0.0], t_discard=0.0)


def test_shuffled_surrogate_is_small():
    t = np.arange(0, 400, 0.05)
    rec = _record(t, 0.7 * t)
    c = cos_correlation([rec], [0.25, 0.5], t_discard=0.0, shuffle_seed=1)
    assert np.all(np.abs(c.values) < 3 / math.sqrt(c.n_samples))


def test_interjump_drift_uses_emissions_only():
    t = np.arange(10.0)
    sphi = np.array([0, 0, 0, 1, 1, 1, 1, 2, 2, 2], float)
    rec = _record(t, np.zeros(10), sphi, jumps=[1.5, 3.0, 7.0], kinds=[COLLISION, EMISSION,
                                                                     EMISSION])
    assert list(interjump_phase_sum_drift(rec)) == [0.0, 0.0, 0.0]
    rec2 = _record(t, np.zeros(10), sphi, jumps=[3.0], kinds=[EMISSION])
    assert list(interjump_phase_sum_drift(rec2)) == [0.0, 1.0]


def test_phase_sum_constant_without_phase_noise():
    p = SystemParams.from_ratios(0.05, 5.0, 0.0)
    for r in run_trajectories(p, 3, 100.0, master_seed=2, sample_every=5):
        assert interjump_phase_sum_drift(r).max() < 1e-9


def test_resonant_phase_difference_starts_at_pi():
    r = run_trajectory(SystemParams.from_ratios(0.05, 5.0), 0, 1.0, sample_every=10)
    assert abs(r.dphi[0]) == pytest.approx(math.pi)
    assert mixing_angle(r.params) == -math.pi / 4


def test_trajectory_spectrum_close_to_resolvent():
    p = SystemParams.from_ratios(0.3, 1.0, 0.3)
    w = np.array([-1.0, 0.0, 1.0])
    s = spectrum_from_trajectories(p, 200, w, master_seed=4, workers=2)
    ref = spectrum_resolvent(p, w).values
    assert np.all(np.abs(s.values - ref) <= 4 * s.errors)
    assert s.method == "trajectory"
