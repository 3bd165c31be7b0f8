"""Quantum-trajectory (Monte Carlo wave function) simulation.

Trajectories are propagated in the frame of the laser phase,
``psi_e~ = e^{-i phi} psi_e``, where the coherent part is time independent.
Per step of length ``dt``:

1. collisional jumps (``2 S^z``, state-independent rate ``Gamma/2``) whose
   exponentially distributed arrival times fall nearest to the current step
   boundary are applied;
2. the no-jump evolution ``exp((-i H - gamma |e><e|) dt)`` is applied to the
   unnormalized state;
3. the laser phase moves by a Gaussian increment of variance ``2 L dt``,
   rotating ``psi_e~`` by the opposite angle;
4. a spontaneous emission (``S^-``) happens when the squared norm drops below
   a uniform random threshold, after which the threshold is redrawn.

This waiting-time scheme samples the same jump statistics as per-step jump
probabilities ``(Gamma/2) dt`` and ``2 gamma |psi_e|^2 dt`` without their
first-order time-discretization error.  States are renormalized at jumps and
samples only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.linalg import expm

from ._kernels import rotation
from .ensemble import SpectrumGrid, default_omegas, gamma1_resolvent, steady_state
from .model import (AtomState, ParameterError, PROJ_E, SystemParams, hamiltonian,
                    mixing_angle, phase_observables)
from .sde import StepSizeError, check_step, max_step, sample_indices, steps_for
from .seeding import STREAM_TRAJECTORY, complex_stderr, map_paths, mean_and_stderr, path_seed, substreams

COLLISION = 0
EMISSION = 1
JUMP_NAMES = {COLLISION: "collision", EMISSION: "spontaneous"}

MAX_JUMP_PROBABILITY = 0.1
DEFAULT_N_TRAJ = 500_000


def collision_rate(params: SystemParams) -> float:
    """Rate of collisional jumps; each flips the coherence sign, dephasing it at ``Gamma``."""
    return 0.5 * params.coll


def emission_rate_constant(params: SystemParams) -> float:
    """Spontaneous emissions occur at ``2 gamma |psi_e|^2``."""
    return 2.0 * params.gamma


def transient_time(params: SystemParams) -> float:
    """Discarded start-up time ``10 / gamma`` before stationary statistics."""
    if params.gamma <= 0.0:
        raise ParameterError("stationary statistics need gamma > 0")
    return 10.0 / params.gamma


def check_jump_step(params: SystemParams, dt: float) -> None:
    """Reject steps on which the combined jump probability exceeds 0.1."""
    check_step(params, dt)
    p = (collision_rate(params) + emission_rate_constant(params)) * dt
    if p > MAX_JUMP_PROBABILITY:
        raise StepSizeError(f"jump probability per step {p:.3g} exceeds {MAX_JUMP_PROBABILITY}")


def no_jump_propagator(params: SystemParams, dt: float) -> np.ndarray:
    """``exp(-i H_eff dt)`` at laser phase zero, ``H_eff = H - i gamma |e><e|``.

    The collisional contribution to ``H_eff`` is a multiple of the identity
    and only changes the norm, so it is left out; collisions are drawn from
    their own exponential clock.
    """
    k = -1j * hamiltonian(params, 0.0) - params.gamma * PROJ_E
    return expm(k * dt)


@nb.njit(cache=True, nogil=True)
def _trajectory_kernel(prop, coll_rate_dt, sig, damped, g, e, phi, sample_idx,
                       rng_jump, rng_phase, out_g, out_e, out_phi, jump_step, jump_kind):
    """Run one trajectory; returns the total number of jumps.

    ``out_*`` receive the normalized laser-frame amplitudes and the laser phase
    after ``sample_idx[k]`` steps.  Jumps beyond the capacity of
    ``jump_step`` are counted but not stored.
    """
    p00, p01, p10, p11 = prop[0, 0], prop[0, 1], prop[1, 0], prop[1, 1]
    capacity = jump_step.shape[0]
    n_jumps = 0
    n_samples = sample_idx.shape[0]
    n_steps = sample_idx[n_samples - 1] if n_samples > 0 else 0
    if coll_rate_dt > 0.0:
        next_coll = rng_jump.exponential(1.0) / coll_rate_dt
    else:
        next_coll = np.inf
    threshold = rng_jump.random() if damped else 0.0
    k = 0
    while k < n_samples and sample_idx[k] == 0:
        out_g[k] = g
        out_e[k] = e
        out_phi[k] = phi
        k += 1
    for n in range(n_steps):
        # Collisions whose arrival rounds to this boundary.
        while next_coll < n + 0.5:
            g = -g
            if n_jumps < capacity:
                jump_step[n_jumps] = n
                jump_kind[n_jumps] = 0
            n_jumps += 1
            next_coll += rng_jump.exponential(1.0) / coll_rate_dt
        g, e = p00 * g + p01 * e, p10 * g + p11 * e
        if sig > 0.0:
            d = sig * rng_phase.standard_normal()
            phi += d
            c, s = rotation(d)
            e *= complex(c, -s)
        if damped:
            nrm = g.real * g.real + g.imag * g.imag + e.real * e.real + e.imag * e.imag
            if nrm < threshold:
                a = abs(e)
                # Lab-frame |g> amplitude after the jump is psi_e / |psi_e|.
                c, s = np.cos(phi), np.sin(phi)
                g = complex(c, s) * e / a
                e = 0.0 + 0.0j
                threshold = rng_jump.random()
                if n_jumps < capacity:
                    jump_step[n_jumps] = n + 1
                    jump_kind[n_jumps] = 1
                n_jumps += 1
        while k < n_samples and sample_idx[k] == n + 1:
            nrm = math.sqrt(g.real * g.real + g.imag * g.imag + e.real * e.real + e.imag * e.imag)
            out_g[k] = g / nrm
            out_e[k] = e / nrm
            out_phi[k] = phi
            k += 1
        if not damped and (n & 1023) == 0:
            nrm = math.sqrt(g.real * g.real + g.imag * g.imag + e.real * e.real + e.imag * e.imag)
            g /= nrm
            e /= nrm
    return n_jumps


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled states, jumps and dressed-phase observables of one trajectory.

    ``amp_g``/``amp_e`` are normalized bare-basis amplitudes in the lab frame.
    ``jump_times``/``jump_kinds`` list every jump in time order (kinds use
    :data:`COLLISION` and :data:`EMISSION`).
    """

    times: np.ndarray
    amp_g: np.ndarray
    amp_e: np.ndarray
    phi: np.ndarray
    jump_times: np.ndarray
    jump_kinds: np.ndarray
    dphi: np.ndarray
    sphi: np.ndarray
    valid: np.ndarray
    params: SystemParams = field(compare=False)
    seed: int = 0
    dt: float = 0.0

    @property
    def states(self) -> list[AtomState]:
        return [AtomState(complex(a), complex(b), float(p), float(t))
                for a, b, p, t in zip(self.amp_g, self.amp_e, self.phi, self.times)]

    @property
    def jumps(self) -> list[tuple[float, str]]:
        return [(float(t), JUMP_NAMES[int(k)]) for t, k in zip(self.jump_times, self.jump_kinds)]

    def emission_times(self) -> np.ndarray:
        return self.jump_times[self.jump_kinds == EMISSION]

    def collision_times(self) -> np.ndarray:
        return self.jump_times[self.jump_kinds == COLLISION]


def _expected_jumps(params: SystemParams, t_end: float) -> int:
    mean = (collision_rate(params) + emission_rate_constant(params)) * t_end
    return int(mean + 10.0 * math.sqrt(mean + 1.0) + 64)


def run_trajectory(params: SystemParams, seed: int, t_end: float, dt: float | None = None,
                   sample_every: int = 1, initial: AtomState | None = None) -> TrajectoryRecord:
    """Simulate one trajectory from ``initial`` (default ``|g>``), sampling every ``sample_every`` steps.

    ``seed`` is split into a jump stream and a laser-phase stream.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    dt = max_step(params) if dt is None else float(dt)
    check_jump_step(params, dt)
    n_steps = steps_for(t_end, dt)
    idx = np.arange(0, n_steps + 1, int(sample_every), dtype=np.int64)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    state = AtomState.ground() if initial is None else initial.normalized()
    g0 = complex(state.amp_g)
    e0 = complex(state.amp_e * np.exp(-1j * state.phi))
    prop = no_jump_propagator(params, dt)
    capacity = _expected_jumps(params, t_end)
    while True:
        rng_jump, rng_phase = substreams(seed, 2)
        m = len(idx)
        out_g = np.empty(m, dtype=complex)
        out_e = np.empty(m, dtype=complex)
        out_phi = np.empty(m)
        jump_step = np.empty(capacity, dtype=np.int64)
        jump_kind = np.empty(capacity, dtype=np.int8)
        n_jumps = _trajectory_kernel(prop, collision_rate(params) * dt,
                                     math.sqrt(2.0 * params.phase_noise * dt),
                                     params.gamma > 0.0, g0, e0, float(state.phi), idx,
                                     rng_jump, rng_phase, out_g, out_e, out_phi,
                                     jump_step, jump_kind)
        if n_jumps <= capacity:
            break
        capacity = 2 * n_jumps
    amp_e = out_e * np.exp(1j * out_phi)
    theta = mixing_angle(params)
    dphi, sphi, valid = phase_observables(out_g, amp_e, theta)
    return TrajectoryRecord(idx * dt + state.t, out_g, amp_e, out_phi,
                            jump_step[:n_jumps] * dt + state.t, jump_kind[:n_jumps].copy(),
                            dphi, sphi, valid, params, int(seed), dt)


def trajectory_seed(master_seed: int, index: int) -> int:
    return path_seed(master_seed, index, STREAM_TRAJECTORY)


def run_trajectories(params: SystemParams, n_traj: int, t_end: float, master_seed: int = 0,
                     dt: float | None = None, sample_every: int = 1,
                     workers: int = 1) -> list[TrajectoryRecord]:
    """Independent trajectories with seeds derived from ``master_seed``."""
    out: list[TrajectoryRecord | None] = [None] * n_traj

    def work(indices: range) -> None:
        for i in indices:
            out[i] = run_trajectory(params, trajectory_seed(master_seed, i), t_end, dt,
                                    sample_every)

    map_paths(work, n_traj, workers)
    return out  # type: ignore[return-value]


def _sample_ensemble(params: SystemParams, n_traj: int, sample_times, master_seed: int,
                     dt: float, workers: int):
    """Laser-frame amplitudes and phases of every trajectory at ``sample_times``."""
    check_jump_step(params, dt)
    idx = sample_indices(sample_times, dt)
    m = len(idx)
    gs = np.empty((n_traj, m), dtype=complex)
    es = np.empty((n_traj, m), dtype=complex)
    phis = np.empty((n_traj, m))
    prop = no_jump_propagator(params, dt)
    rate_dt = collision_rate(params) * dt
    sig = math.sqrt(2.0 * params.phase_noise * dt)
    damped = params.gamma > 0.0
    no_jumps = np.empty(0, dtype=np.int64)
    no_kinds = np.empty(0, dtype=np.int8)

    def work(indices: range) -> None:
        for i in indices:
            rng_jump, rng_phase = substreams(trajectory_seed(master_seed, i), 2)
            _trajectory_kernel(prop, rate_dt, sig, damped, 1.0 + 0j, 0j, 0.0, idx,
                               rng_jump, rng_phase, gs[i], es[i], phis[i], no_jumps, no_kinds)

    map_paths(work, n_traj, workers)
    return idx * dt, gs, es, phis


@dataclass(frozen=True)
class DensityEnsemble:
    """Trajectory-averaged density matrix with standard errors.

    ``chi1`` is the coherence in the laser frame, ``<rho_eg e^{-i phi}>``,
    comparable with the primed averaged equations; ``rho_eg`` is the plain
    lab-frame average.
    """

    times: np.ndarray
    n_traj: int
    rho_ee: np.ndarray
    rho_ee_err: np.ndarray
    chi1: np.ndarray
    chi1_err_re: np.ndarray
    chi1_err_im: np.ndarray
    rho_eg: np.ndarray
    rho_eg_err_re: np.ndarray
    rho_eg_err_im: np.ndarray


def ensemble_density(params: SystemParams, n_traj: int, t_grid, master_seed: int = 0,
                     dt: float | None = None, workers: int = 1) -> DensityEnsemble:
    """Average ``|psi><psi|`` over ``n_traj`` trajectories started in ``|g>``."""
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    dt = max_step(params) if dt is None else float(dt)
    times, gs, es, phis = _sample_ensemble(params, n_traj, t_grid, master_seed, dt, workers)
    ee = np.abs(es) ** 2
    chi1 = es * np.conj(gs)
    eg = chi1 * np.exp(1j * phis)
    ee_m, ee_e = mean_and_stderr(ee)
    c_m, c_re, c_im = complex_stderr(chi1)
    r_m, r_re, r_im = complex_stderr(eg)
    return DensityEnsemble(times, n_traj, ee_m, ee_e, c_m, c_re, c_im, r_m, r_re, r_im)


# ------------------------------------------------------------ phase statistics


@dataclass(frozen=True)
class PhaseStatistics:
    """Stationary histogram of the dressed phase difference plus scatter data."""

    edges: np.ndarray
    counts: np.ndarray
    scatter_t: np.ndarray
    scatter_dphi: np.ndarray
    n_samples: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def modes(self, half_window: int = 8, z_min: float = 5.0) -> np.ndarray:
        """Bin centers of significant circular modes.

        A bin is a mode when it holds the (first) maximum count within
        ``half_window`` bins on either side, wrapping around ``+-pi``, and
        exceeds the smallest count of that window by ``z_min`` Poisson
        standard deviations.
        """
        c = self.counts.astype(float)
        nb_ = len(c)
        found = []
        for i in range(nb_):
            window = np.array([c[(i + j) % nb_] for j in range(-half_window, half_window + 1)])
            if int(np.argmax(window)) != half_window:
                continue
            if c[i] - window.min() > z_min * math.sqrt(max(c[i], 1.0)):
                found.append(self.centers[i])
        return np.array(found)

    def has_mode_at(self, target: float) -> bool:
        """Whether some mode lies within one bin width of ``target`` (circularly)."""
        for m in self.modes():
            dist = abs(math.remainder(m - target, 2 * math.pi))
            if dist <= self.bin_width * (1 + 1e-9):
                return True
        return False

    def is_bimodal_zero_pi(self) -> bool:
        m = self.modes()
        return len(m) == 2 and self.has_mode_at(0.0) and self.has_mode_at(math.pi)

    def is_unimodal_pi(self) -> bool:
        m = self.modes()
        return len(m) == 1 and self.has_mode_at(math.pi)

    def max_min_ratio(self) -> float:
        lo = self.counts.min()
        return math.inf if lo == 0 else float(self.counts.max() / lo)


def phase_statistics(records, bins: int = 64, t_discard: float | None = None) -> PhaseStatistics:
    """Histogram of valid ``dphi`` samples after ``t_discard`` over (-pi, pi].

    The scatter data come from the first record.  Binning uses half-open bins
    ``(a, b]`` so that ``pi`` and ``-pi`` fall in the same (last) bin.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    params = records[0].params
    if t_discard is None:
        t_discard = transient_time(params) if params.gamma > 0 else 0.0
    edges = np.linspace(-math.pi, math.pi, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    for rec in records:
        sel = rec.valid & (rec.times >= t_discard)
        x = rec.dphi[sel]
        k = np.searchsorted(edges, x, side="left") - 1
        k[k < 0] = bins - 1  # -pi is the same angle as pi
        k = np.minimum(k, bins - 1)
        counts += np.bincount(k, minlength=bins)
    first = records[0]
    return PhaseStatistics(edges, counts, first.times.copy(), first.dphi.copy(),
                           int(counts.sum()))


# ----------------------------------------------------------- cosine correlation


class DegenerateCorrelation(ValueError):
    """``cos dphi`` has no variance over the analysis window."""


@dataclass(frozen=True)
class PhaseCorrelation:
    """Normalized autocorrelation of ``cos dphi``.

    ``values[k]`` belongs to ``taus[k]``; ``window`` is the integration
    horizon and ``norm`` the constant that makes ``values[0] == 1``.
    """

    taus: np.ndarray
    values: np.ndarray
    window: float
    norm: float
    n_samples: int


def _lag_steps(taus, sample_dt: float) -> np.ndarray:
    lags = np.rint(np.asarray(taus, dtype=float) / sample_dt).astype(int)
    if np.any(np.abs(lags * sample_dt - np.asarray(taus)) > 1e-9 * max(1.0, sample_dt)):
        raise ValueError("lags must be multiples of the sampling interval")
    if np.any(lags < 0):
        raise ValueError("lags must be nonnegative")
    return lags


def cos_correlation(records, taus, t_discard: float | None = None,
                    shuffle_seed: int | None = None) -> PhaseCorrelation:
    """``C(tau) = c * sum_t (x(t + tau) - xbar)(x(t) - xbar) dt`` with ``x = cos dphi``.

    For each record the sum runs over the stationary window
    ``[t_discard, t_end - max(taus)]``, skipping pairs with an invalid sample,
    and ``xbar`` is that record's mean over its stationary samples.  Several
    records are pooled by adding their sums; ``c`` makes ``C(0) = 1``.  With
    ``shuffle_seed`` set, the stationary samples of each record are randomly
    permuted first, which destroys all time correlation.
    """
    if isinstance(records, TrajectoryRecord):
        records = [records]
    records = list(records)
    params = records[0].params
    if t_discard is None:
        t_discard = transient_time(params) if params.gamma > 0 else 0.0
    sample_dt = float(records[0].times[1] - records[0].times[0])
    lags = _lag_steps(taus, sample_dt)
    max_lag = int(lags.max()) if len(lags) else 0
    sums = np.zeros(len(lags))
    zero = 0.0
    n_pairs = 0
    window = 0.0
    for rec in records:
        sel = rec.times >= t_discard - 1e-12
        x = np.cos(rec.dphi[sel])
        ok = rec.valid[sel].copy()
        if shuffle_seed is not None:
            perm = np.random.default_rng([shuffle_seed, rec.seed]).permutation(len(x))
            x, ok = x[perm], ok[perm]
        n = len(x) - max_lag
        if n <= 0:
            raise ValueError("record shorter than the largest lag")
        if not ok.any():
            continue
        y = np.where(ok, x - x[ok].mean(), 0.0)
        base = y[:n]
        zero += float(np.dot(base, base))
        n_pairs += int(ok[:n].sum())
        window = n * sample_dt
        for j, lag in enumerate(lags):
            sums[j] += np.dot(base, y[lag:lag + n])
    if zero <= 1e-300:
        raise DegenerateCorrelation("cos(dphi) is constant over the analysis window")
    norm = 1.0 / (zero * sample_dt)
    return PhaseCorrelation(np.asarray(taus, dtype=float), sums / zero, window, norm, n_pairs)


# -------------------------------------------------------------- phase sum law


def interjump_phase_sum_drift(record: TrajectoryRecord) -> np.ndarray:
    """Largest change of ``sphi`` inside each interval between emissions.

    Samples at an emission instant belong to the interval that the emission
    opens.  Collisions do not delimit intervals.
    """
    em = record.emission_times()
    bounds = np.concatenate([[-np.inf], em, [np.inf]])
    drifts = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        sel = (record.times >= a) & (record.times < b) & record.valid
        s = record.sphi[sel]
        if len(s) >= 2:
            drifts.append(float(s.max() - s.min()))
    return np.array(drifts)


# ------------------------------------------------------- trajectory spectrum


@dataclass(frozen=True)
class StationaryEstimate:
    """Per-trajectory time averages of ``<chi'_1>`` and ``<chi'_4>`` over the stationary window."""

    chi1: np.ndarray
    chi4: np.ndarray


def stationary_averages(params: SystemParams, n_traj: int, t_end: float, master_seed: int = 0,
                        dt: float | None = None, sample_interval: float | None = None,
                        workers: int = 1) -> StationaryEstimate:
    dt = max_step(params) if dt is None else float(dt)
    t_ss = transient_time(params)
    every = max(1, int(round((sample_interval or 0.1 / params.rabi) / dt)))
    # Window ends are rounded up to whole steps.
    start = int(math.ceil(t_ss / dt - 1e-9))
    stop = int(math.ceil(t_end / dt - 1e-9))
    idx = np.arange(start, stop + 1, every)
    times, gs, es, _ = _sample_ensemble(params, n_traj, idx * dt, master_seed, dt, workers)
    return StationaryEstimate((es * np.conj(gs)).mean(axis=1), (np.abs(es) ** 2).mean(axis=1))


def spectrum_from_trajectories(params: SystemParams, n_traj: int, omegas=None,
                               t_end: float | None = None, master_seed: int = 0,
                               dt: float | None = None, workers: int = 1) -> SpectrumGrid:
    """Spectrum from trajectory estimates of the stationary ``chi'_1, chi'_4``.

    The estimates feed the regression propagator of the averaged equations.
    Since the spectrum is linear in the estimates, it is evaluated per
    trajectory and the error band is the standard error across trajectories.
    """
    if params.gamma <= 0.0:
        raise ParameterError("the trajectory spectrum needs gamma > 0")
    if omegas is None:
        omegas = default_omegas(rabi=params.rabi)
    omegas = np.asarray(omegas, dtype=float)
    t_end = 2.0 * transient_time(params) if t_end is None else t_end
    est = stationary_averages(params, n_traj, t_end, master_seed, dt, workers=workers)
    exact = steady_state(params).vec
    # Gamma_1 is linear in chi'_1 and chi'_4: get its response to each.
    unit1 = np.array([1, 0, 0, 0], dtype=complex)
    unit4 = np.array([0, 0, 0, 1], dtype=complex)
    r1, el1 = gamma1_resolvent(params, omegas, stationary=unit1, projector_state=exact)
    r4, el4 = gamma1_resolvent(params, omegas, stationary=unit4, projector_state=exact)
    per_traj = (np.outer(est.chi1, r1) + np.outer(est.chi4, r4)).real
    mean, err = mean_and_stderr(per_traj)
    elastic = (est.chi1.mean() * el1 + est.chi4.mean() * el4).real
    return SpectrumGrid(omegas, mean, "trajectory", errors=err, elastic_weight=float(elastic),
                        params=params)
