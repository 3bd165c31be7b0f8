"""Brute-force Monte Carlo integration of the stochastic Bloch equations.

Each path carries its own realization of the collisional frequency noise and
the laser phase.  Per step, the drive and decay terms advance by one RK4 step
with the laser phase held at its start-of-step value.  The noises then act as
exact phase factors: ``rho_eg`` gains ``exp(i dW_coll)`` and the laser phase
moves by ``dW_phase``.  Treating the noise as exact rotations is the
Stratonovich reading of white noise, which yields the ``-Gamma`` damping of
the averaged coherence.

Only ``rho_eg`` is stored; ``rho_ge`` is its conjugate, so every path stays
Hermitian exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ._kernels import rotation
from .ensemble import noiseless_generator
from .model import DensityMatrix, ParameterError, SystemParams
from .seeding import STREAM_SDE, complex_stderr, map_paths, mean_and_stderr, path_seed, substreams

STEP_FRACTION = 0.01


class StepSizeError(ValueError):
    """The time step is too coarse for the declared accuracy rule."""


def max_step(params: SystemParams) -> float:
    """Largest admissible step: ``0.01 / max(all rates)``."""
    return STEP_FRACTION / params.max_rate()


def check_step(params: SystemParams, dt: float) -> None:
    if not (dt > 0.0) or dt > max_step(params) * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt} exceeds the bound {max_step(params)}")


def steps_for(t_end: float, dt: float) -> int:
    """Number of whole steps covering ``t_end``; ``t_end`` must be a multiple of ``dt``."""
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end = {t_end} is not a multiple of dt = {dt}")
    return n


def sample_indices(times, dt: float) -> np.ndarray:
    """Step counts at which each sample time is reached."""
    idx = np.array([steps_for(t, dt) for t in np.atleast_1d(times)], dtype=np.int64)
    if np.any(np.diff(idx) < 0):
        raise ValueError("sample times must be nondecreasing")
    return idx


@dataclass(frozen=True)
class NoisePath:
    """Realized noise increments of one path.

    ``dW_coll[n]`` is the integral of the collisional frequency noise over step
    ``n`` (variance ``2 Gamma dt``); ``dW_phase[n]`` is the laser-phase
    increment (variance ``2 L dt``).
    """

    seed: int
    dt: float
    dW_coll: np.ndarray
    dW_phase: np.ndarray

    @classmethod
    def generate(cls, seed: int, params: SystemParams, dt: float, n_steps: int) -> NoisePath:
        """Draw both increment sequences from independent sub-streams of ``seed``."""
        rng_coll, rng_phase = substreams(seed, 2)
        sc = np.sqrt(2.0 * params.coll * dt)
        sp = np.sqrt(2.0 * params.phase_noise * dt)
        return cls(int(seed), float(dt), sc * rng_coll.standard_normal(n_steps),
                   sp * rng_phase.standard_normal(n_steps))

    def __len__(self) -> int:
        return len(self.dW_coll)

    def phase(self) -> np.ndarray:
        """Laser phase after each step, starting from zero."""
        return np.cumsum(self.dW_phase)


def rk4_step_matrix(params: SystemParams, dt: float) -> np.ndarray:
    """One classical RK4 step of the drive-and-decay equations at laser phase zero.

    The equations are linear with constant coefficients while the laser phase
    is frozen, so an RK4 step is the matrix polynomial
    ``1 + X + X^2/2 + X^3/6 + X^4/24`` with ``X = A dt`` acting on
    ``(rho_eg, rho_ge, rho_gg, rho_ee)``.  At phase ``phi`` the same step
    applies to ``rho_eg e^{-i phi}`` in place of ``rho_eg``.
    """
    x = noiseless_generator(params) * dt
    x2 = x @ x
    x3 = x2 @ x
    return np.eye(4) + x + x2 / 2 + x3 / 6 + x3 @ x / 24


@nb.njit(cache=True, nogil=True, inline="always")
def _record(k, out_gg, out_ee, out_eg, out_phi, gg, ee, eg, phi):
    out_gg[k] = gg
    out_ee[k] = ee
    out_eg[k] = eg
    out_phi[k] = phi


@nb.njit(cache=True, nogil=True)
def _integrate_kernel(step, dw_coll, dw_phase, sc, sp, rng_coll, rng_phase, gg, ee, eg,
                      sample_idx, out_gg, out_ee, out_eg, out_phi):
    """Advance one path; samples are taken after the listed numbers of steps.

    Increments come from ``dw_coll``/``dw_phase`` when those are non-empty and
    are otherwise drawn as ``sc * N(0, 1)``/``sp * N(0, 1)`` from the two
    generators, which reproduces :meth:`NoisePath.generate` exactly.
    """
    use_arrays = dw_coll.shape[0] > 0
    phi = 0.0
    z = 1.0 + 0.0j
    n_samples = sample_idx.shape[0]
    k = 0
    while k < n_samples and sample_idx[k] == 0:
        _record(k, out_gg, out_ee, out_eg, out_phi, gg, ee, eg, phi)
        k += 1
    n_steps = sample_idx[n_samples - 1] if n_samples > 0 else 0
    t00, t01, t02, t03 = step[0, 0], step[0, 1], step[0, 2], step[0, 3]
    t20, t21, t22, t23 = step[2, 0], step[2, 1], step[2, 2], step[2, 3]
    t30, t31, t32, t33 = step[3, 0], step[3, 1], step[3, 2], step[3, 3]
    for n in range(n_steps):
        u = z.conjugate() * eg
        uc = u.conjugate()
        u_new = t00 * u + t01 * uc + t02 * gg + t03 * ee
        gg_new = (t20 * u + t21 * uc + t22 * gg + t23 * ee).real
        ee = (t30 * u + t31 * uc + t32 * gg + t33 * ee).real
        gg = gg_new
        eg = z * u_new
        if use_arrays:
            wc = dw_coll[n]
            wp = dw_phase[n]
        else:
            wc = sc * rng_coll.standard_normal() if sc > 0.0 else 0.0
            wp = sp * rng_phase.standard_normal() if sp > 0.0 else 0.0
        if wc != 0.0:
            c, s = rotation(wc)
            eg *= complex(c, s)
        if wp != 0.0:
            phi += wp
            c, s = rotation(wp)
            z *= complex(c, s)
            z *= 1.5 - 0.5 * (z.real * z.real + z.imag * z.imag)
        while k < n_samples and sample_idx[k] == n + 1:
            _record(k, out_gg, out_ee, out_eg, out_phi, gg, ee, eg, phi)
            k += 1


_NO_ARRAY = np.empty(0)


@dataclass(frozen=True)
class SbeSeries:
    """Sampled density-matrix elements and laser phase along one path."""

    times: np.ndarray
    rho_gg: np.ndarray
    rho_ee: np.ndarray
    rho_eg: np.ndarray
    phi: np.ndarray

    def at(self, k: int) -> DensityMatrix:
        return DensityMatrix(float(self.rho_gg[k]), float(self.rho_ee[k]),
                             complex(self.rho_eg[k]))

    @property
    def chi1_primed(self) -> np.ndarray:
        """Coherence in the frame of the laser, ``rho_eg e^{-i phi}``."""
        return self.rho_eg * np.exp(-1j * self.phi)


def integrate_sbe(params: SystemParams, path: NoisePath, rho0: DensityMatrix,
                  t_end: float | None = None, sample_times=None) -> SbeSeries:
    """Integrate one noise realization from ``rho0``.

    Samples are taken at ``sample_times`` (default: every step up to
    ``t_end``); each must be a whole number of steps.
    """
    check_step(params, path.dt)
    if not rho0.is_physical():
        raise ParameterError("initial density matrix is not physical")
    dt = path.dt
    if sample_times is None:
        if t_end is None:
            raise ValueError("give t_end or sample_times")
        idx = np.arange(steps_for(t_end, dt) + 1, dtype=np.int64)
    else:
        idx = sample_indices(sample_times, dt)
    if len(idx) and idx[-1] > len(path):
        raise ValueError("noise path is shorter than the requested horizon")
    m = len(idx)
    out_gg, out_ee, out_phi = np.empty(m), np.empty(m), np.empty(m)
    out_eg = np.empty(m, dtype=complex)
    rng = np.random.default_rng(0)  # unused when increments are supplied
    _integrate_kernel(rk4_step_matrix(params, dt), path.dW_coll, path.dW_phase,
                      0.0, 0.0, rng, rng, float(rho0.rho_gg), float(rho0.rho_ee), complex(rho0.rho_eg),
                      idx, out_gg, out_ee, out_eg, out_phi)
    return SbeSeries(idx * dt, out_gg, out_ee, out_eg, out_phi)


@dataclass(frozen=True)
class EnsembleSeries:
    """Path averages with standard errors at each sample time.

    Complex observables carry separate errors for the real and imaginary
    parts (``*_err_re``, ``*_err_im``).  With one path every error is NaN.
    """

    times: np.ndarray
    n_paths: int
    rho_ee: np.ndarray
    rho_ee_err: np.ndarray
    rho_gg: np.ndarray
    chi1: np.ndarray
    chi1_err_re: np.ndarray
    chi1_err_im: np.ndarray
    rho_eg: np.ndarray
    rho_eg_err_re: np.ndarray
    rho_eg_err_im: np.ndarray


def ensemble_average(params: SystemParams, n_paths: int, sample_times, master_seed: int = 0,
                     dt: float | None = None, rho0: DensityMatrix | None = None,
                     workers: int = 1) -> EnsembleSeries:
    """Average ``n_paths`` independent paths at ``sample_times``.

    Path ``i`` uses seed ``path_seed(master_seed, i, STREAM_SDE)``, so the
    result depends only on ``(master_seed, n_paths, dt, sample_times)``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    dt = max_step(params) if dt is None else float(dt)
    check_step(params, dt)
    rho0 = DensityMatrix.ground() if rho0 is None else rho0
    idx = sample_indices(sample_times, dt)
    n_steps = int(idx[-1])
    m = len(idx)
    gg = np.empty((n_paths, m))
    ee = np.empty((n_paths, m))
    eg = np.empty((n_paths, m), dtype=complex)
    ph = np.empty((n_paths, m))
    step = rk4_step_matrix(params, dt)

    sc = float(np.sqrt(2.0 * params.coll * dt))
    sp = float(np.sqrt(2.0 * params.phase_noise * dt))

    def work(indices: range) -> None:
        for i in indices:
            rng_coll, rng_phase = substreams(path_seed(master_seed, i, STREAM_SDE), 2)
            _integrate_kernel(step, _NO_ARRAY, _NO_ARRAY, sc, sp, rng_coll, rng_phase,
                              float(rho0.rho_gg), float(rho0.rho_ee), complex(rho0.rho_eg),
                              idx, gg[i], ee[i], eg[i], ph[i])

    map_paths(work, n_paths, workers)
    chi1 = eg * np.exp(-1j * ph)
    ee_m, ee_e = mean_and_stderr(ee)
    c_m, c_re, c_im = complex_stderr(chi1)
    r_m, r_re, r_im = complex_stderr(eg)
    return EnsembleSeries(idx * dt, n_paths, ee_m, ee_e, gg.mean(axis=0),
                          c_m, c_re, c_im, r_m, r_re, r_im)


def collisional_phase_average(params: SystemParams, n_paths: int, t: float, master_seed: int = 0,
                              dt: float | None = None) -> tuple[complex, float, float]:
    """Monte Carlo mean of ``exp(i sum dW_coll)`` up to time ``t`` with standard errors."""
    dt = max_step(params) if dt is None else float(dt)
    n = steps_for(t, dt)
    vals = np.empty(n_paths, dtype=complex)
    for i in range(n_paths):
        path = NoisePath.generate(path_seed(master_seed, i, STREAM_SDE), params, dt, n)
        vals[i] = np.exp(1j * path.dW_coll.sum())
    m, e_re, e_im = complex_stderr(vals)
    return complex(m), float(e_re), float(e_im)
