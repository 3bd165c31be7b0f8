"""Physical parameters, two-level operators and the dressed-state picture.

State vectors are stored in the bare basis ordered ``(g, e)``; index 0 is the
ground state and index 1 the excited state.  Rates are angular frequencies and
everything downstream depends only on their ratios to the Rabi frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class ParameterError(ValueError):
    """Raised when physical parameters violate their domain."""


@dataclass(frozen=True)
class SystemParams:
    """Rates of the driven, noisy two-level atom.

    Attributes
    ----------
    rabi : Rabi frequency Omega (> 0), the unit scale.
    detuning : Delta = omega_atom - omega_laser, any sign.
    gamma : natural linewidth; populations decay at ``2 * gamma``.
    coll : collisional frequency-noise strength Gamma (>= 0).
    phase_noise : laser phase-diffusion strength L (>= 0).
    """

    rabi: float = 1.0
    detuning: float = 0.0
    gamma: float = 0.05
    coll: float = 0.0
    phase_noise: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rabi", "detuning", "gamma", "coll", "phase_noise"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.rabi <= 0.0:
            raise ParameterError(f"rabi must be > 0, got {self.rabi}")
        for name in ("gamma", "coll", "phase_noise"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_ratios(
        cls,
        gamma: float,
        Gamma: float = 0.0,
        L: float = 0.0,
        Delta: float = 0.0,
        rabi: float = 1.0,
    ) -> SystemParams:
        """Build from dimensionless ratios to the Rabi frequency."""
        return cls(rabi=rabi, detuning=Delta * rabi, gamma=gamma * rabi,
                   coll=Gamma * rabi, phase_noise=L * rabi)

    def ratios(self) -> dict[str, float]:
        """Rates divided by the Rabi frequency, keyed like the CLI flags."""
        r = self.rabi
        return {"gamma": self.gamma / r, "Gamma": self.coll / r,
                "L": self.phase_noise / r, "Delta": self.detuning / r}

    def scaled(self, s: float) -> SystemParams:
        """All rates multiplied by ``s`` (a change of time unit)."""
        return SystemParams(self.rabi * s, self.detuning * s, self.gamma * s,
                            self.coll * s, self.phase_noise * s)

    def with_(self, **changes: float) -> SystemParams:
        return replace(self, **changes)

    def max_rate(self) -> float:
        """Fastest rate in the problem, used by the step-size rule."""
        return max(self.rabi, self.gamma, self.coll, self.phase_noise,
                   abs(self.detuning), 1e-30)


# Bare-basis operators, (g, e) ordering.
SZ = np.array([[-0.5, 0.0], [0.0, 0.5]], dtype=complex)
S_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
S_PLUS = S_MINUS.conj().T
PROJ_E = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


def hamiltonian(params: SystemParams, phi: float = 0.0) -> np.ndarray:
    """Coherent generator of the stochastic Bloch equations at laser phase ``phi``.

    ``d psi/dt = -i H psi`` with this ``H`` reproduces the drive terms of the
    Bloch equations for the populations and ``rho_eg`` used throughout the
    package (``H = -Delta S^z - Omega/2 (e^{-i phi} S^- + e^{i phi} S^+)``).
    """
    z = np.exp(1j * phi)
    return (-params.detuning * SZ
            - 0.5 * params.rabi * (np.conj(z) * S_MINUS + z * S_PLUS))


def collision_operator(params: SystemParams) -> np.ndarray:
    """Collisional jump operator ``sqrt(Gamma/2) * 2 S^z``.

    Jumps occur at the state-independent rate ``Gamma/2``; each flips the sign
    of the coherence, so coherences dephase at ``Gamma`` as in the averaged
    equations.
    """
    return math.sqrt(params.coll / 2.0) * 2.0 * SZ


def emission_operator(params: SystemParams) -> np.ndarray:
    """Spontaneous-emission jump operator ``sqrt(2 gamma) S^-`` (rate ``2 gamma rho_ee``)."""
    return math.sqrt(2.0 * params.gamma) * S_MINUS


@dataclass(frozen=True)
class AtomState:
    """Pure atomic state in the bare basis plus the current laser phase."""

    amp_g: complex
    amp_e: complex
    phi: float = 0.0
    t: float = 0.0

    @classmethod
    def ground(cls) -> AtomState:
        return cls(1.0 + 0j, 0j)

    @classmethod
    def from_vector(cls, vec, phi: float = 0.0, t: float = 0.0) -> AtomState:
        return cls(complex(vec[0]), complex(vec[1]), float(phi), float(t))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_g, self.amp_e], dtype=complex)

    def norm(self) -> float:
        return math.sqrt(abs(self.amp_g) ** 2 + abs(self.amp_e) ** 2)

    def normalized(self) -> AtomState:
        n = self.norm()
        if n == 0.0:
            raise ParameterError("cannot normalize the zero vector")
        return replace(self, amp_g=self.amp_g / n, amp_e=self.amp_e / n)

    def density_matrix(self) -> DensityMatrix:
        s = self.normalized()
        return DensityMatrix(abs(s.amp_g) ** 2, abs(s.amp_e) ** 2,
                             s.amp_e * s.amp_g.conjugate())


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian 2x2 density matrix; ``rho_ge`` is ``conj(rho_eg)``."""

    rho_gg: float
    rho_ee: float
    rho_eg: complex

    @classmethod
    def ground(cls) -> DensityMatrix:
        return cls(1.0, 0.0, 0j)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> DensityMatrix:
        return cls(float(m[0, 0].real), float(m[1, 1].real), complex(m[1, 0]))

    @property
    def rho_ge(self) -> complex:
        return complex(self.rho_eg).conjugate()

    def matrix(self) -> np.ndarray:
        return np.array([[self.rho_gg, self.rho_ge], [self.rho_eg, self.rho_ee]],
                        dtype=complex)

    def trace(self) -> float:
        return self.rho_gg + self.rho_ee

    def is_physical(self, tol: float = 1e-10) -> bool:
        """Unit trace, populations in [0, 1] and the 2x2 positivity bound."""
        if abs(self.trace() - 1.0) > tol:
            return False
        if not (-tol <= self.rho_ee <= 1.0 + tol and -tol <= self.rho_gg <= 1.0 + tol):
            return False
        return abs(self.rho_eg) ** 2 <= self.rho_gg * self.rho_ee + tol

    def chi(self) -> np.ndarray:
        """The 4-vector ``(rho_eg, rho_ge, rho_gg, rho_ee)`` at laser phase zero."""
        return np.array([self.rho_eg, self.rho_ge, self.rho_gg, self.rho_ee],
                        dtype=complex)


def mixing_angle(params: SystemParams) -> float:
    """Dressed-basis mixing angle ``-arctan(Omega/Delta)/2`` in (-pi/4, pi/4].

    At resonance the ``Delta -> 0+`` branch gives ``-pi/4``.
    """
    if params.detuning == 0.0:
        return -math.pi / 4.0
    return -0.5 * math.atan(params.rabi / params.detuning)


def dressed_basis(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Dressed vectors ``|1>, |2>`` as (g, e) arrays.

    ``|1> = cos(theta)|g> + sin(theta)|e>`` and ``|2> = sin(theta)|g> - cos(theta)|e>``.
    With this sign choice ``2 S^z`` swaps ``|1>`` and ``|2>`` at resonance.
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c, s], dtype=complex), np.array([s, -c], dtype=complex)


def wrap_phase(x):
    """Map angles onto (-pi, pi]."""
    w = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2.0 * math.pi)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class DressedDecomposition:
    """Moduli and phases of a state expanded on the dressed basis."""

    c1: float
    c2: float
    phi1: float
    phi2: float
    theta: float

    @property
    def valid(self) -> bool:
        """Phases are only defined when both moduli are nonzero."""
        return self.c1 != 0.0 and self.c2 != 0.0

    @property
    def delta_phi(self) -> float:
        """``phi1 - phi2`` wrapped to (-pi, pi]; NaN when invalid."""
        if not self.valid:
            return math.nan
        return wrap_phase(self.phi1 - self.phi2)

    @property
    def sigma_phi(self) -> float:
        """``phi1 + phi2`` (not wrapped); NaN when invalid."""
        if not self.valid:
            return math.nan
        return self.phi1 + self.phi2

    def reconstruct(self, phi: float = 0.0, t: float = 0.0) -> AtomState:
        v1, v2 = dressed_basis(self.theta)
        vec = (self.c1 * np.exp(1j * self.phi1) * v1
               + self.c2 * np.exp(1j * self.phi2) * v2)
        return AtomState.from_vector(vec, phi, t)


def dressed_amplitudes(amp_g, amp_e, theta: float):
    """Projections ``(<1|psi>, <2|psi>)``; vectorized over arrays."""
    c, s = math.cos(theta), math.sin(theta)
    amp_g = np.asarray(amp_g)
    amp_e = np.asarray(amp_e)
    return c * amp_g + s * amp_e, s * amp_g - c * amp_e


def to_dressed(state: AtomState, params: SystemParams) -> DressedDecomposition:
    """Expand ``state`` on the dressed basis of ``params``.

    A phase whose modulus is exactly zero is reported as 0; the resulting
    decomposition has ``valid == False``.
    """
    theta = mixing_angle(params)
    s = state.normalized()
    a1, a2 = dressed_amplitudes(s.amp_g, s.amp_e, theta)
    a1, a2 = complex(a1), complex(a2)
    return DressedDecomposition(abs(a1), abs(a2),
                                math.atan2(a1.imag, a1.real),
                                math.atan2(a2.imag, a2.real), theta)


def phase_observables(amp_g, amp_e, theta: float):
    """Per-sample ``(dphi, sphi, valid)`` for arrays of bare amplitudes.

    ``dphi`` is wrapped to (-pi, pi]; ``sphi`` is unwrapped along the sample
    axis assuming changes below pi between samples.  Invalid samples (a zero
    dressed modulus) carry NaN and do not break the unwrapping of the others.
    """
    a1, a2 = dressed_amplitudes(amp_g, amp_e, theta)
    valid = (a1 != 0) & (a2 != 0)
    dphi = np.angle(a1 * np.conj(a2))
    raw = np.angle(a1 * a2)
    sphi = np.full(raw.shape, np.nan)
    sphi[valid] = np.unwrap(raw[valid])
    dphi = np.where(valid, dphi, np.nan)
    return dphi, sphi, valid


@dataclass(frozen=True)
class SwapCheck:
    """Outcome of :func:`collisional_swap_check`; truthy when the swap holds."""

    ok: bool
    residual: float
    message: str

    def __bool__(self) -> bool:
        return self.ok


def collisional_swap_check(params: SystemParams, tol: float = 1e-12) -> SwapCheck:
    """Check that ``2 S^z`` exchanges the dressed states (true only at resonance)."""
    v1, v2 = dressed_basis(mixing_angle(params))
    op = 2.0 * SZ
    residual = max(np.max(np.abs(op @ v1 - v2)), np.max(np.abs(op @ v2 - v1)))
    if params.detuning != 0.0:
        return SwapCheck(False, float(residual),
                         f"swap identity requires Delta = 0, got {params.detuning}")
    ok = residual < tol
    msg = "2 S^z swaps |1> and |2>" if ok else f"swap residual {residual:.3e}"
    return SwapCheck(bool(ok), float(residual), msg)
