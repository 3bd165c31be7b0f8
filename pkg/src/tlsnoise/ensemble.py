"""Averaged 4x4 Bloch systems and the resolvent route to the spectrum.

The phase-dressed averages are ordered ``(chi1, chi2, chi3, chi4)``:

* plain  ``chi   = (rho_eg,            rho_ge e^{2i phi}, rho_gg e^{i phi},  rho_ee e^{i phi})``
* primed ``chi'  = (rho_eg e^{-i phi}, rho_ge e^{i phi},  rho_gg,            rho_ee)``
* double ``chi'' = (rho_eg e^{-2i phi}, rho_ge,           rho_gg e^{-i phi}, rho_ee e^{-i phi})``

The primed block holds the physical one-time averages.  Two-time dipole
correlations are propagated with the double-primed generator.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple

import numpy as np
from scipy.linalg import expm

from .model import DensityMatrix, SystemParams

Kind = Literal["plain", "primed", "double"]

TRACE_ROW = np.array([0.0, 0.0, 1.0, 1.0])


class NoUniqueSteadyState(ArithmeticError):
    """The constrained steady-state system is singular."""


class SingularResolvent(ArithmeticError):
    """``i omega - N''`` cannot be inverted at a requested frequency."""


def noiseless_generator(params: SystemParams) -> np.ndarray:
    """Generator of the chi variables with both noises switched off."""
    d, g = params.detuning, params.gamma
    h = 0.5j * params.rabi
    return np.array([
        [1j * d - g, 0, h, -h],
        [0, -1j * d - g, -h, h],
        [h, -h, 0, 2 * g],
        [-h, h, 0, -2 * g],
    ], dtype=complex)


# Multiplicative noise enters chi_i as i*(a_i * dw + b_i * dphi/dt), with dw the
# collisional frequency noise and dphi/dt the laser phase derivative.
NOISE_COUPLINGS: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = {
    "plain": ((1, -1, 0, 0), (0, 2, 1, 1)),
    "primed": ((1, -1, 0, 0), (-1, 1, 0, 0)),
    "double": ((1, -1, 0, 0), (-2, 0, -1, -1)),
}


def noise_tensor(params: SystemParams, kind: Kind = "plain") -> np.ndarray:
    """Noise correlation tensor ``Q[i, j, k, l]`` of the chi variables of ``kind``.

    With ``<F_ij(t) F_kl(t')> = 2 Q_ijkl delta(t - t')`` and diagonal couplings
    ``F_ii = i (a_i dw + b_i dphi/dt)`` this is
    ``Q_ijkl = -delta_ij delta_kl (Gamma a_i a_k + L b_i b_k)``.
    """
    a, b = (np.asarray(v, dtype=float) for v in NOISE_COUPLINGS[kind])
    coeff = params.coll * np.outer(a, a) + params.phase_noise * np.outer(b, b)
    q = np.zeros((4, 4, 4, 4))
    for i in range(4):
        for k in range(4):
            q[i, i, k, k] = -coeff[i, k]
    return q


def tabulated_noise_tensor(params: SystemParams) -> np.ndarray:
    """Plain-kind tensor from the commonly quoted coefficient table.

    Its off-diagonal ``(2, 3), (2, 4)`` entries differ from the coupling-derived
    tensor, but the contraction that enters the generator is the same.
    """
    G, L = params.coll, params.phase_noise
    a = np.array([
        [G, -G, 0, 0],
        [-G, 4 * L + G, L, L],
        [0, 2 * L, L, L],
        [0, 2 * L, L, L],
    ], dtype=float)
    q = np.zeros((4, 4, 4, 4))
    for i in range(4):
        for k in range(4):
            q[i, i, k, k] = -a[i, k]
    return q


def contract_noise(q: np.ndarray) -> np.ndarray:
    """``sum_k Q[i, k, k, j]``, the drift correction induced by the noise."""
    return np.einsum("ikkj->ij", q)


def generator_from_contraction(params: SystemParams, kind: Kind = "plain") -> np.ndarray:
    """Generator assembled as ``M_ij + sum_k Q_ikkj`` for the given chi kind."""
    return noiseless_generator(params) + contract_noise(noise_tensor(params, kind))


class Generators(NamedTuple):
    plain: np.ndarray
    primed: np.ndarray
    double: np.ndarray


# Additive perturbations (kind, row, col, delta) used by the validation
# suite's mutation test; empty in normal operation.
_FAULTS: list[tuple[str, int, int, complex]] = []


def build_generators(params: SystemParams) -> Generators:
    """The three averaged generators (plain, primed, double-primed)."""
    m = noiseless_generator(params)
    G, L = params.coll, params.phase_noise
    n = m - np.diag([G, 4 * L + G, L, L])
    n1 = m - np.diag([L + G, L + G, 0, 0])
    n2 = m - np.diag([4 * L + G, G, L, L])
    gens = Generators(n, n1, n2)
    for kind, i, j, delta in _FAULTS:
        getattr(gens, kind)[i, j] += delta
    return gens


@contextmanager
def injected_fault(kind: str = "double", row: int = 1, col: int = 1, delta: complex = 0.1):
    """Temporarily perturb one generator entry (a mutation-testing hook)."""
    _FAULTS.append((kind, row, col, delta))
    try:
        yield
    finally:
        _FAULTS.remove((kind, row, col, delta))


@dataclass(frozen=True)
class ChiBlock:
    """A chi 4-vector together with the generator that advances it."""

    kind: Kind
    vec: np.ndarray
    gen: np.ndarray
    t: float = 0.0

    @classmethod
    def from_density(cls, params: SystemParams, rho: DensityMatrix,
                     kind: Kind = "primed") -> ChiBlock:
        """Initial block with laser phase zero, where all three kinds coincide."""
        gens = build_generators(params)
        return cls(kind, rho.chi(), getattr(gens, kind))

    def trace(self) -> complex:
        return self.vec[2] + self.vec[3]

    def density(self) -> DensityMatrix:
        """Physical density matrix of a primed block."""
        if self.kind != "primed":
            raise ValueError("only the primed block holds physical populations")
        return DensityMatrix(float(self.vec[2].real), float(self.vec[3].real),
                             complex(self.vec[0]))


def evolve(block: ChiBlock, t: float) -> ChiBlock:
    """Advance ``block`` by ``t`` with the dense matrix exponential."""
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"evolution time must be finite and >= 0, got {t}")
    return replace(block, vec=expm(block.gen * t) @ block.vec, t=block.t + t)


def evolve_series(block: ChiBlock, times) -> np.ndarray:
    """Primed-style vectors at each absolute time in ``times`` (rows)."""
    times = np.asarray(times, dtype=float)
    return np.array([expm(block.gen * (t - block.t)) @ block.vec for t in times])


def steady_state(params: SystemParams, cond_limit: float = 1e13) -> ChiBlock:
    """Stationary primed block: ``N' x = 0`` with ``x3 + x4 = 1``.

    The last row of ``N'`` is replaced by the trace constraint.
    """
    if params.gamma <= 0.0:
        raise NoUniqueSteadyState("a unique steady state requires gamma > 0")
    gen = build_generators(params).primed
    a = gen.copy()
    a[3] = TRACE_ROW
    if np.linalg.cond(a) > cond_limit:
        raise NoUniqueSteadyState("constrained steady-state system is singular")
    b = np.zeros(4, dtype=complex)
    b[3] = 1.0
    x = np.linalg.solve(a, b)
    # Populations are real by symmetry; drop rounding residue.
    x[2] = x[2].real
    x[3] = x[3].real
    x[1] = np.conj(x[0])
    return ChiBlock("primed", x, gen)


@dataclass(frozen=True)
class SpectrumGrid:
    """Spectral density sampled on an angular-frequency grid.

    ``elastic_weight`` is the weight of a coherent delta peak at zero
    frequency; it is not contained in ``values``.
    """

    omegas: np.ndarray
    values: np.ndarray
    method: Literal["analytic", "resolvent", "trajectory"]
    errors: np.ndarray | None = None
    elastic_weight: float = 0.0
    params: SystemParams | None = field(default=None, compare=False)

    def peak_normalized(self) -> np.ndarray:
        peak = np.max(np.abs(self.values))
        return self.values / peak if peak > 0 else self.values.copy()

    def index_of(self, omega: float) -> int:
        return int(np.argmin(np.abs(self.omegas - omega)))

    @property
    def step(self) -> float:
        return float(self.omegas[1] - self.omegas[0])


def default_omegas(lo: float = -10.0, hi: float = 10.0, points: int = 2001,
                   rabi: float = 1.0) -> np.ndarray:
    """Uniform grid in units of the Rabi frequency; exact zero when symmetric."""
    grid = np.linspace(lo, hi, points)
    if lo == -hi and points % 2 == 1:
        grid[points // 2] = 0.0
    return grid * rabi


def regression_vector(stationary: np.ndarray) -> np.ndarray:
    """Double-primed initial vector of the dipole correlation.

    Applying ``S^-`` to the stationary state leaves ``rho_ee`` in the ``rho_ge``
    slot and ``rho_eg e^{-i phi}`` in the ground-population slot.
    """
    x = stationary
    return np.array([0.0, x[3], x[0], 0.0], dtype=complex)


def _zero_mode_projector(params: SystemParams, stationary: np.ndarray) -> np.ndarray:
    """Projector onto the zero mode of ``N''``; it only exists for ``L = 0``."""
    if params.phase_noise != 0.0:
        return np.zeros((4, 4), dtype=complex)
    return np.outer(stationary, TRACE_ROW).astype(complex)


def gamma1_resolvent(params: SystemParams, omegas, stationary: np.ndarray | None = None,
                     projector_state: np.ndarray | None = None,
                     cond_limit: float = 1e13) -> tuple[np.ndarray, complex]:
    """Laplace-transformed dipole correlation and its elastic weight.

    Returns ``(gamma1, elastic)`` where ``gamma1[k]`` is the second component of
    ``(i omega_k - N'')^{-1} v`` with ``v`` the regression vector.  Without
    phase noise ``N''`` has a zero mode producing a delta at ``omega = 0``;
    that part is split off and returned as ``elastic`` (the coherent weight
    ``|<chi'_1>|^2``), so ``gamma1`` stays finite at zero frequency.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if stationary is None:
        stationary = steady_state(params).vec
    n2 = build_generators(params).double
    v = regression_vector(stationary)
    if projector_state is None:
        projector_state = stationary
    p0 = _zero_mode_projector(params, projector_state)
    elastic = complex((p0 @ v)[1])
    rhs = v - p0 @ v
    base = p0 - n2
    eye = np.eye(4)
    out = np.empty(omegas.shape, dtype=complex)
    for k, w in enumerate(omegas):
        a = 1j * w * eye + base
        if np.linalg.cond(a) > cond_limit:
            raise SingularResolvent(f"i*omega - N'' singular at omega = {w}")
        out[k] = np.linalg.solve(a, rhs)[1]
    return out, elastic


def spectrum_resolvent(params: SystemParams, omegas=None) -> SpectrumGrid:
    """Fluorescence spectrum ``Re Gamma_1(omega)`` by one 4x4 solve per frequency."""
    if omegas is None:
        omegas = default_omegas(rabi=params.rabi)
    omegas = np.asarray(omegas, dtype=float)
    g1, elastic = gamma1_resolvent(params, omegas)
    return SpectrumGrid(omegas, g1.real, "resolvent", elastic_weight=elastic.real,
                        params=params)


def dipole_correlation(params: SystemParams, taus) -> np.ndarray:
    """Stationary ``<S^+(t + tau) S^-(t)>`` for ``tau >= 0`` (elastic part included)."""
    x = steady_state(params).vec
    n2 = build_generators(params).double
    v = regression_vector(x)
    return np.array([(expm(n2 * tau) @ v)[1] for tau in np.asarray(taus, float)])
