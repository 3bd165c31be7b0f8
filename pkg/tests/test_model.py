from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsnoise.model import (S_MINUS, SZ, AtomState, DensityMatrix, DressedDecomposition,
                            ParameterError, SystemParams, collision_operator,
                            collisional_swap_check, dressed_basis, emission_operator,
                            hamiltonian, mixing_angle, phase_observables, to_dressed,
                            wrap_phase)

finite = st.floats(-1e3, 1e3, allow_nan=False)
rate = st.floats(0.0, 50.0, allow_nan=False)
amp = st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False)


def test_params_validation():
    with pytest.raises(ParameterError):
        SystemParams(rabi=0.0)
    with pytest.raises(ParameterError):
        SystemParams(gamma=-0.1)
    with pytest.raises(ParameterError):
        SystemParams(coll=math.nan)
    with pytest.raises(ParameterError):
        SystemParams(detuning=math.inf)


def test_from_ratios_round_trip():
    p = SystemParams.from_ratios(0.05, 5.0, 0.2, -1.5, rabi=3.0)
    assert p.coll == 15.0
    assert p.ratios() == pytest.approx({"gamma": 0.05, "Gamma": 5.0, "L": 0.2, "Delta": -1.5})
    assert p.max_rate() == 15.0


def test_hamiltonian_hermitian_and_drive_sign():
    p = SystemParams.from_ratios(0.05, Delta=0.3)
    h = hamiltonian(p, phi=0.7)
    assert np.allclose(h, h.conj().T)
    # <g|H|e> = -Omega/2 e^{-i phi}
    assert h[0, 1] == pytest.approx(-0.5 * np.exp(-0.7j))
    assert h[1, 1] - h[0, 0] == pytest.approx(-0.3)


def test_jump_operators():
    p = SystemParams.from_ratios(0.05, 5.0)
    c = collision_operator(p)
    # rate Gamma/2 of a pure sign flip: C^dag C = Gamma/2 * identity
    assert np.allclose(c.conj().T @ c, 2.5 * np.eye(2))
    e = emission_operator(p)
    assert np.allclose(e.conj().T @ e, np.diag([0.0, 0.1]))
    assert np.allclose(e, math.sqrt(0.1) * S_MINUS)


def test_density_matrix_helpers():
    rho = AtomState(1 / math.sqrt(2), 1j / math.sqrt(2)).density_matrix()
    assert rho.rho_eg == pytest.approx(0.5j)
    assert rho.is_physical()
    assert np.allclose(DensityMatrix.from_matrix(rho.matrix()).matrix(), rho.matrix())
    assert not DensityMatrix(0.5, 0.5, 0.6).is_physical()
    assert not DensityMatrix(0.7, 0.5, 0.0).is_physical()
    assert np.allclose(DensityMatrix.ground().chi(), [0, 0, 1, 0])


def test_mixing_angle_branches():
    assert mixing_angle(SystemParams()) == -math.pi / 4
    assert mixing_angle(SystemParams.from_ratios(0.05, Delta=0.5)) == pytest.approx(
        -0.5535743588970452, abs=1e-15)
    assert mixing_angle(SystemParams.from_ratios(0.05, Delta=-0.5)) > 0


def test_dressed_states_diagonalize_hamiltonian():
    for delta in (0.0, 0.4, -2.0):
        p = SystemParams.from_ratios(0.05, Delta=delta)
        v1, v2 = dressed_basis(mixing_angle(p))
        h = hamiltonian(p)
        assert abs(v1.conj() @ h @ v2) < 1e-14
        assert abs(v1.conj() @ v2) < 1e-15


def test_ground_state_has_phase_difference_pi():
    d = to_dressed(AtomState.ground(), SystemParams())
    assert d.valid
    assert d.delta_phi == pytest.approx(math.pi)
    assert d.c1 == pytest.approx(1 / math.sqrt(2))


def test_zero_dressed_modulus_is_invalid():
    v1, _ = dressed_basis(-math.pi / 4)
    d = to_dressed(AtomState.from_vector(v1), SystemParams())
    assert not d.valid
    assert math.isnan(d.delta_phi) and math.isnan(d.sigma_phi)
    dphi, sphi, valid = phase_observables(np.array([v1[0], 1.0]), np.array([v1[1], 0.0]),
                                          -math.pi / 4)
    assert list(valid) == [False, True]
    assert math.isnan(dphi[0]) and not math.isnan(sphi[1])


def test_swap_check():
    ok = collisional_swap_check(SystemParams())
    assert ok and ok.residual < 1e-15
    bad = collisional_swap_check(SystemParams.from_ratios(0.05, Delta=0.3))
    assert not bad and "Delta" in bad.message


def test_phase_sum_unwraps():
    t = np.linspace(0, 10, 200)
    theta = -math.pi / 4
    v1, v2 = dressed_basis(theta)
    vec = np.outer(np.exp(1j * 0.8 * t), v1) + np.outer(np.exp(1j * 0.4 * t), v2)
    _, sphi, _ = phase_observables(vec[:, 0], vec[:, 1], theta)
    assert np.allclose(np.diff(sphi), 1.2 * (t[1] - t[0]))


@given(x=st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_phase_range(x):
    w = wrap_phase(x)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)


@given(a=amp, b=amp, delta=st.floats(-5, 5, allow_nan=False), phi=finite)
def test_dressed_round_trip(a, b, delta, phi):
    if abs(a) + abs(b) < 1e-6:
        return
    p = SystemParams.from_ratios(0.05, Delta=delta)
    s = AtomState(a, b, phi).normalized()
    back = to_dressed(s, p).reconstruct(phi)
    assert np.allclose(back.vector, s.vector, atol=1e-12)


@given(delta=st.floats(-5, 5, allow_nan=False), phi=finite,
       t=st.floats(0.0, 20.0, allow_nan=False))
@settings(max_examples=50)
def test_coherent_evolution_unitary(delta, phi, t):
    from scipy.linalg import expm
    u = expm(-1j * hamiltonian(SystemParams.from_ratios(0.05, Delta=delta), phi) * t)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


@given(g=rate, c=rate, l=rate, d=st.floats(-50, 50, allow_nan=False),
       s=st.floats(0.1, 10.0, allow_nan=False))
def test_scaling_keeps_ratios(g, c, l, d, s):
    p = SystemParams(rabi=1.0, detuning=d, gamma=g, coll=c, phase_noise=l)
    q = p.scaled(s)
    for k, v in p.ratios().items():
        assert math.isclose(q.ratios()[k], v, rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(mixing_angle(q), mixing_angle(p), abs_tol=1e-12)


def test_sz_flip_conjugates_dressed_phases():
    # 2 S^z at resonance maps c1|1> + c2|2> to c2|1> + c1|2>: dphi -> -dphi, sphi kept
    d = DressedDecomposition(0.6, 0.8, 0.3, -1.1, -math.pi / 4)
    s = d.reconstruct()
    flipped = AtomState.from_vector(2 * SZ @ s.vector)
    e = to_dressed(flipped, SystemParams())
    assert e.delta_phi == pytest.approx(-d.delta_phi)
    assert wrap_phase(e.sigma_phi - d.sigma_phi + math.pi) == pytest.approx(math.pi)
