"""Closed-form rational spectrum and shape classification of spectra.

The closed form is evaluated term by term exactly as written, with no
algebraic simplification.  It is compared against the resolvent route in
:mod:`tlsnoise.validation`; where they disagree the resolvent is the reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import SpectrumGrid, build_generators, default_omegas, steady_state
from .model import ParameterError, SystemParams

# Half-width of the symmetric limit taken at the removable zero-frequency
# singularity that appears when there is no phase noise.
ZERO_FREQ_EPS = 1e-6


class SingularSpectrum(ZeroDivisionError):
    """A denominator of the closed form vanishes at the requested frequency."""


@dataclass(frozen=True)
class SpectrumFormulaParts:
    """Building blocks of the closed form at one frequency."""

    omega_prime: float
    p1: complex
    p2: complex
    p3: complex
    p4: complex
    f: complex


def omega_prime(params: SystemParams) -> float:
    w, d, g = params.rabi, params.detuning, params.gamma
    s = params.coll + params.phase_noise + g
    return d ** 2 / s + s + w ** 2 / (2 * g)


def formula_parts(params: SystemParams, omega: complex) -> SpectrumFormulaParts:
    """Evaluate the composite pieces at (possibly complex) ``omega``."""
    if params.gamma <= 0.0:
        raise ParameterError("the closed form requires gamma > 0")
    d, g, G, L = params.detuning, params.gamma, params.coll, params.phase_noise
    iw = 1j * omega
    p1 = iw + L + 2 * g
    p2 = iw - 1j * d + 4 * L + G + g
    p3 = iw + 1j * d + g + G
    p4 = iw + 2 * L + G + g
    if iw + L == 0:
        raise SingularSpectrum("f(omega) has a pole at omega = 0 when L = 0")
    f = (1 + 1j * d / (G + L + g)) * (1 - 2 * g / (iw + L))
    return SpectrumFormulaParts(omega_prime(params), p1, p2, p3, p4, f)


def gamma1_from_parts(params: SystemParams, parts: SpectrumFormulaParts) -> complex:
    w2, g = params.rabi ** 2, params.gamma
    p1, p2, p3, p4, f = parts.p1, parts.p2, parts.p3, parts.p4, parts.f
    den = p1 * p2 * p3 + w2 * p4
    if den == 0:
        raise SingularSpectrum("denominator p1 p2 p3 + Omega^2 p4 vanishes")
    num = p1 * p2 - g * f * p2 + 0.5 * w2
    return w2 / (4 * g * parts.omega_prime) * num / den


def gamma1_closed_form(params: SystemParams, omega: float) -> complex:
    """Closed-form ``Gamma_1(omega)``; the spectrum is its real part."""
    if not np.isfinite(omega):
        raise ValueError(f"omega must be finite, got {omega}")
    return gamma1_from_parts(params, formula_parts(params, omega))


def spectrum_closed_form(params: SystemParams, omegas=None) -> SpectrumGrid:
    """Closed-form spectrum on a grid (method tag ``analytic``).

    Without phase noise the closed form has a pole at zero frequency whose
    residue is real, so the real part has a finite limit there.  That limit
    is taken as the mean of the values at ``+-ZERO_FREQ_EPS * rabi``.
    """
    if omegas is None:
        omegas = default_omegas(rabi=params.rabi)
    omegas = np.asarray(omegas, dtype=float)
    vals = np.empty(omegas.shape)
    eps = ZERO_FREQ_EPS * params.rabi
    for k, w in enumerate(omegas):
        if w == 0.0 and params.phase_noise == 0.0:
            vals[k] = 0.5 * (gamma1_closed_form(params, eps).real
                             + gamma1_closed_form(params, -eps).real)
        else:
            vals[k] = gamma1_closed_form(params, w).real
    return SpectrumGrid(omegas, vals, "analytic", params=params)


def gamma1_column_form(params: SystemParams, omegas) -> np.ndarray:
    """``R22 <chi'_4> + R24 <chi'_1>`` with ``R = (i omega - N'')^{-1}``.

    The closed form is algebraically identical to this combination, which
    makes it a direct consistency check of the closed form against ``N''``.
    """
    x = steady_state(params).vec
    n2 = build_generators(params).double
    out = np.empty(len(omegas), dtype=complex)
    for k, w in enumerate(np.asarray(omegas, dtype=float)):
        a = 1j * w * np.eye(4) - n2
        e2 = np.zeros(4, dtype=complex)
        e2[1] = 1.0
        row = np.linalg.solve(a.T, e2)  # second row of the inverse
        out[k] = row[1] * x[3] + row[3] * x[0]
    return out


# ---------------------------------------------------------------- shape tests


def has_dip(spectrum: SpectrumGrid, steps: int = 3) -> bool:
    """True when ``S`` rises strictly away from zero frequency for ``steps`` grid steps."""
    s = spectrum.values
    i0 = spectrum.index_of(0.0)
    if i0 - steps < 0 or i0 + steps >= len(s):
        return False
    for k in range(steps):
        if not (s[i0 + k] < s[i0 + k + 1] and s[i0 - k] < s[i0 - k - 1]):
            return False
    return True


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima."""
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1


def local_minima(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])) + 1


@dataclass(frozen=True)
class LimitReport:
    """Shape class of a spectrum with the located extrema (in units of Omega)."""

    kind: str
    maxima: tuple[float, ...]
    minima: tuple[float, ...]


def classify_spectrum(spectrum: SpectrumGrid, rabi: float = 1.0) -> LimitReport:
    """Classify as ``triplet``, ``doublet-with-dip``, ``single-peaked`` or ``unclassified``."""
    w = spectrum.omegas / rabi
    h = abs(spectrum.step) / rabi
    maxima = tuple(float(x) for x in w[local_maxima(spectrum.values)])
    minima = tuple(float(x) for x in w[local_minima(spectrum.values)])

    def near(x: float, target: float) -> bool:
        return abs(x - target) <= h * (1 + 1e-9)

    kind = "unclassified"
    if len(maxima) == 3 and near(maxima[1], 0.0) and near(maxima[0], -1.0) \
            and near(maxima[2], 1.0):
        kind = "triplet"
    elif len(maxima) == 2 and maxima[0] < 0 < maxima[1] and any(near(m, 0.0) for m in minima):
        kind = "doublet-with-dip"
    elif len(maxima) == 1 and near(maxima[0], 0.0):
        kind = "single-peaked"
    return LimitReport(kind, maxima, minima)


def limit_check(params: SystemParams, omegas=None, method: str = "resolvent") -> LimitReport:
    """Shape classification of the spectrum of ``params`` on a fine grid."""
    from .ensemble import spectrum_resolvent

    if omegas is None:
        omegas = default_omegas(-3.0, 3.0, 601, rabi=params.rabi)
    if method == "analytic":
        spec = spectrum_closed_form(params, omegas)
    else:
        spec = spectrum_resolvent(params, omegas)
    return classify_spectrum(spec, params.rabi)
