from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from oracles import bloch_steady_state, lindblad_gamma1, lindblad_steady_state
from tlsnoise.ensemble import (ChiBlock, NoUniqueSteadyState, build_generators, contract_noise,
                               default_omegas, dipole_correlation, evolve, evolve_series,
                               gamma1_resolvent, generator_from_contraction, injected_fault,
                               noise_tensor, noiseless_generator, spectrum_resolvent,
                               steady_state, tabulated_noise_tensor)
from tlsnoise.model import DensityMatrix, SystemParams

params_st = st.builds(
    SystemParams.from_ratios,
    gamma=st.floats(0.01, 1.0), Gamma=st.floats(0.0, 5.0), L=st.floats(0.0, 3.0),
    Delta=st.floats(-2.0, 2.0))

FIG1 = SystemParams.from_ratios(0.05, 5.0, 0.2)


def test_generators_diagonal_shifts():
    p = SystemParams.from_ratios(0.1, 0.7, 0.3, 0.4)
    m = noiseless_generator(p)
    n, n1, n2 = build_generators(p)
    assert np.allclose(np.diag(m - n), [0.7, 1.9, 0.3, 0.3])
    assert np.allclose(np.diag(m - n1), [1.0, 1.0, 0.0, 0.0])
    assert np.allclose(np.diag(m - n2), [1.9, 0.7, 0.3, 0.3])
    assert np.count_nonzero(m - n - np.diag(np.diag(m - n))) == 0


@given(params_st)
@settings(max_examples=40)
def test_contraction_reproduces_generators(p):
    gens = build_generators(p)
    for kind in ("plain", "primed", "double"):
        assert np.array_equal(generator_from_contraction(p, kind), getattr(gens, kind))
    assert np.array_equal(contract_noise(tabulated_noise_tensor(p)),
                          contract_noise(noise_tensor(p, "plain")))


def test_tabulated_tensor_off_diagonal_differs():
    p = SystemParams.from_ratios(0.05, 1.0, 1.0)
    diff = tabulated_noise_tensor(p) - noise_tensor(p, "plain")
    nz = {(i, k) for i, _, k, _ in zip(*np.nonzero(diff))}
    assert nz == {(1, 2), (1, 3)}


def test_steady_state_frozen():
    x = steady_state(FIG1).vec
    assert x[3].real == pytest.approx(20 / 61, abs=1e-15)
    assert x[0] == pytest.approx(2j / 61, abs=1e-15)
    mollow = steady_state(SystemParams.from_ratios(0.05)).vec
    assert mollow[3].real == pytest.approx(100 / 201, abs=1e-15)


@given(params_st)
@settings(max_examples=40)
def test_steady_state_matches_master_equation(p):
    r = p.ratios()
    x = steady_state(p).vec
    rho = lindblad_steady_state(1.0, r["Delta"], r["gamma"], r["Gamma"], r["L"])
    assert x[3] == pytest.approx(rho[1, 1], abs=1e-12)
    assert x[0] == pytest.approx(rho[1, 0], abs=1e-12)
    assert x[3].real == pytest.approx(
        bloch_steady_state(1.0, r["Delta"], r["gamma"], r["gamma"] + r["Gamma"] + r["L"]),
        abs=1e-12)


def test_steady_state_requires_decay():
    with pytest.raises(NoUniqueSteadyState):
        steady_state(SystemParams.from_ratios(0.0, 1.0))


@given(params_st, st.floats(0.0, 30.0), st.floats(0.0, 30.0))
@settings(max_examples=30)
def test_evolution_semigroup_and_trace(p, t1, t2):
    b = ChiBlock.from_density(p, DensityMatrix.ground())
    one = evolve(evolve(b, t1), t2)
    two = evolve(b, t1 + t2)
    assert np.allclose(one.vec, two.vec, atol=1e-10)
    assert one.trace() == pytest.approx(1.0, abs=1e-10)
    assert one.density().is_physical(1e-9)


def test_evolution_frozen_and_long_time_limit():
    b = ChiBlock.from_density(FIG1, DensityMatrix.ground())
    v = evolve(b, 10.0).vec
    assert v[3].real == pytest.approx(0.31086796747661577, abs=1e-13)
    assert v[0] == pytest.approx(0.0362228694564603j, abs=1e-13)
    late = evolve_series(b, [2000.0])[0]
    assert np.allclose(late, steady_state(FIG1).vec, atol=1e-12)
    with pytest.raises(ValueError):
        evolve(b, -1.0)
    with pytest.raises(ValueError):
        evolve(b, float("nan"))


def test_density_only_for_primed():
    b = ChiBlock.from_density(FIG1, DensityMatrix.ground(), kind="double")
    with pytest.raises(ValueError):
        b.density()


@pytest.mark.parametrize("ratios", [(0.05, 5.0, 0.2, 0.0), (0.05, 0.0, 0.0, 0.0),
                                    (0.3, 0.4, 1.0, 0.7), (0.1, 2.0, 3.0, -1.2),
                                    (0.3, 0.4, 0.0, 0.7)])
def test_resolvent_matches_master_equation(ratios):
    g, G, L, D = ratios
    p = SystemParams.from_ratios(g, G, L, D)
    w = np.array([-3.0, -1.0, -0.3, 0.2, 0.5, 1.0, 3.0])
    ours, elastic = gamma1_resolvent(p, w)
    ref, ref_elastic = lindblad_gamma1(1.0, D, g, G, L, w)
    assert np.max(np.abs(ours - ref)) < 1e-13
    assert elastic.real == pytest.approx(ref_elastic, abs=1e-14)


def test_resolvent_spectrum_frozen():
    s = spectrum_resolvent(FIG1, np.array([0.0, 0.5, 1.0])).values
    assert s == pytest.approx([0.06170699001320329, 0.06169951969584377, 0.06259365265297616],
                              rel=1e-12)
    m = spectrum_resolvent(SystemParams.from_ratios(0.05), np.array([0.0, 1.0]))
    assert m.values == pytest.approx([5.024258672480029, 1.6634192124450864], rel=1e-12)
    assert m.elastic_weight == pytest.approx(0.0024751862577659213, rel=1e-12)


def test_spectrum_integrates_to_excited_population():
    # Re of the transform integrates to pi * <S+ S-> = pi * rho_ee (elastic part included)
    p = SystemParams.from_ratios(0.3, 0.5, 0.0)
    w = np.linspace(-400, 400, 400001)
    s = spectrum_resolvent(p, w)
    area = trapezoid(s.values, w)
    total = area / np.pi + s.elastic_weight
    assert total == pytest.approx(steady_state(p).vec[3].real, rel=2e-3)


def test_dipole_correlation_starts_at_population():
    c = dipole_correlation(FIG1, [0.0, 1e3])
    assert c[0] == pytest.approx(20 / 61, abs=1e-14)
    assert abs(c[1]) < 1e-12


def test_default_grid_has_exact_zero():
    w = default_omegas()
    assert w[1000] == 0.0 and len(w) == 2001
    assert w[1] - w[0] == pytest.approx(0.01)


def test_injected_fault_is_scoped():
    p = SystemParams.from_ratios(0.05, 1.0, 0.5)
    clean = build_generators(p).double.copy()
    with injected_fault(delta=0.25):
        assert build_generators(p).double[1, 1] == clean[1, 1] + 0.25
    assert np.array_equal(build_generators(p).double, clean)
