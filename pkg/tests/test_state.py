import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathphase.errors import DomainError, OrthogonalityError
from pathphase.state import (Attenuate, PathState, PhaseShift, RecombineQ, SplitToQ,
                             apply_element, compensated_shifts, cyclic_geometric_phase,
                             dynamical_phase, evolve_second_loop, pancharatnam_phase,
                             phase_decomposition, principal, run_elements)

S = math.sqrt(0.5)
transmissivity = st.floats(0.0, 1.0)
angles = st.floats(-10.0, 10.0)


def wrapped(x):
    return abs(principal(x))


def arctan_form(T, chi1, chi2):
    """Closed form with the tan; only valid away from dchi = pi (mod 2pi).

    The arctan alone fixes the phase modulo pi; the branch follows the sign of
    cos(dchi / 2).
    """
    d = chi2 - chi1
    branch = math.pi if math.cos(d / 2) < 0 else 0.0
    return (chi1 + chi2) / 2 + branch - math.atan(
        math.tan(d / 2) * (1 - math.sqrt(T)) / (1 + math.sqrt(T)))


def test_split_maps_p_to_q():
    out = apply_element(PathState.p(), SplitToQ())
    assert out.a_perp == pytest.approx(S) and out.a_p == pytest.approx(S)


def test_attenuate_beam_block():
    out = apply_element(PathState(S, S), Attenuate(0.0))
    assert out.a_perp == pytest.approx(S) and out.a_p == 0


def test_phase_shift_sign_flip():
    out = apply_element(PathState(S, S), PhaseShift(0.0, math.pi))
    assert out.a_perp == pytest.approx(S)
    assert out.a_p == pytest.approx(-S, abs=1e-15)


def test_recombine_matches_projector_matmul():
    state = PathState(S, math.sqrt(0.122) * S)
    q = np.array([S, S])
    expected = np.outer(q, q.conj()) @ state.as_array()
    out = apply_element(state, RecombineQ())
    assert np.allclose(out.as_array(), expected, atol=1e-15)
    assert out.a_perp == pytest.approx((1 + math.sqrt(0.122)) / (2 * math.sqrt(2)))


def test_split_and_recombine_are_scaled_idempotent():
    s = PathState(0.3 + 0.1j, -0.2j)
    once = apply_element(s, SplitToQ())
    twice = apply_element(once, SplitToQ())
    assert np.allclose(twice.as_array(), math.sqrt(2) * once.as_array())
    r1 = apply_element(s, RecombineQ())
    r2 = apply_element(r1, RecombineQ())
    assert np.allclose(r1.as_array(), r2.as_array())


def test_element_matrices_agree_with_apply():
    s = PathState(0.4 - 0.2j, 0.1 + 0.7j)
    for e in (SplitToQ(), Attenuate(0.3), PhaseShift(0.4, -1.1), RecombineQ()):
        assert np.allclose(e.matrix() @ s.as_array(), apply_element(s, e).as_array())


@pytest.mark.parametrize("T", [-0.1, 1.5, float("nan")])
def test_attenuate_rejects_bad_T(T):
    with pytest.raises(DomainError):
        Attenuate(T)


def test_non_finite_amplitude_rejected():
    with pytest.raises(DomainError):
        PathState(float("inf"), 0)
    with pytest.raises(DomainError):
        PhaseShift(float("nan"), 0.0)


def test_evolve_examples():
    s = evolve_second_loop(1.0, 0.0, 0.0)
    assert np.allclose(s.as_array(), PathState.q().as_array())
    s = evolve_second_loop(0.0, 1.3, -0.4)
    assert np.allclose(s.as_array(), [S * cmath.exp(1.3j), 0])
    s = evolve_second_loop(0.122, -0.683, 5.600)
    assert abs(s.a_p) / S == pytest.approx(0.34928, abs=1e-5)
    assert s.a_p == pytest.approx(S * math.sqrt(0.122) * cmath.exp(5.6j))
    assert s.a_perp == pytest.approx(S * cmath.exp(-0.683j))


def test_pancharatnam_examples():
    q = PathState.q()
    assert pancharatnam_phase(q, q) == 0.0
    t = run_elements(PathState.p(), [SplitToQ(), Attenuate(0.122),
                                     PhaseShift(-0.683, 5.600), RecombineQ()])
    assert pancharatnam_phase(t, q) == pytest.approx(-0.683, abs=1e-3)
    with pytest.raises(OrthogonalityError):
        pancharatnam_phase(PathState.p(), PathState.p_perp())


@given(st.floats(-math.pi, math.pi, exclude_min=True))
def test_pancharatnam_global_phase(delta):
    r = PathState(0.6, 0.8j)
    t = r.scaled(cmath.exp(1j * delta))
    assert wrapped(pancharatnam_phase(t, r) - delta) < 1e-12


def test_principal_range():
    assert principal(math.pi) == math.pi
    assert principal(-math.pi) == math.pi
    assert principal(3 * math.pi) == pytest.approx(math.pi)


def test_decomposition_cyclic_anchor():
    chi1, chi2 = compensated_shifts(0.122, 2 * math.pi)
    assert chi1 == pytest.approx(-0.6832, abs=1e-4)
    assert chi2 == pytest.approx(5.5999, abs=1e-4)
    d = phase_decomposition(0.122, chi1, chi2)
    assert d.pancharatnam == pytest.approx(-0.683, abs=1e-3)
    assert d.dynamical == pytest.approx(0.0, abs=1e-12)
    assert d.geometric == pytest.approx(-0.683, abs=1e-3)


def test_decomposition_trivial_cases():
    d = phase_decomposition(0.0, 0.7, 2.9)
    assert (d.pancharatnam, d.dynamical) == pytest.approx((0.7, 0.7))
    assert d.geometric == pytest.approx(0.0, abs=1e-15)
    d = phase_decomposition(1.0, -0.4, -0.4)
    assert (d.pancharatnam, d.dynamical, d.geometric) == pytest.approx((-0.4, -0.4, 0.0))


def test_decomposition_quarter_turn_half_absorber():
    d = phase_decomposition(0.5, -math.pi / 6, math.pi / 3)
    # frozen from the arctan closed form, cross-checked by the solid-angle route
    assert d.geometric == pytest.approx(arctan_form(0.5, -math.pi / 6, math.pi / 3), abs=1e-14)
    assert d.geometric == pytest.approx(0.0918809331, abs=1e-9)
    assert d.amplitude == pytest.approx(abs(cmath.exp(-1j * math.pi / 6)
                                            + math.sqrt(0.5) * cmath.exp(1j * math.pi / 3)) / 2)


def test_decomposition_orthogonality_error():
    with pytest.raises(OrthogonalityError):
        phase_decomposition(1.0, 0.0, math.pi)


@given(transmissivity, angles, angles)
def test_decomposition_matches_arctan_form_away_from_poles(T, chi1, chi2):
    d = chi2 - chi1
    if abs(math.cos(d / 2)) < 1e-3:
        return
    ph = phase_decomposition(T, chi1, chi2)
    assert wrapped(ph.pancharatnam - arctan_form(T, chi1, chi2)) < 1e-9
    assert ph.geometric == ph.pancharatnam - ph.dynamical
    assert ph.amplitude >= 0


def test_compensated_shifts_examples():
    assert compensated_shifts(1.0, math.pi) == pytest.approx((-math.pi / 2, math.pi / 2))
    assert compensated_shifts(0.0, 4.2) == pytest.approx((0.0, 4.2))
    # oracle: chi2 - chi1 = dchi and chi1 + T chi2 = 0
    T, dchi = 0.122, 2 * math.pi
    expected = np.linalg.solve([[-1.0, 1.0], [1.0, T]], [dchi, 0.0])
    assert compensated_shifts(T, dchi) == pytest.approx(tuple(expected), abs=1e-13)


@given(transmissivity, st.floats(-20, 20))
def test_compensated_shifts_contract(T, dchi):
    c1, c2 = compensated_shifts(T, dchi)
    assert abs((c2 - c1) - dchi) < 1e-12
    assert abs(dynamical_phase(T, c1, c2)) < 1e-12


def test_cyclic_geometric_phase():
    assert cyclic_geometric_phase(0.0) == 0.0
    assert cyclic_geometric_phase(0.122) == pytest.approx(-0.683, abs=1e-3)
    assert cyclic_geometric_phase(1.0) == pytest.approx(-math.pi)
    for T in (0.05, 0.122, 0.6):
        cos_t = (1 - T) / (1 + T)
        assert cyclic_geometric_phase(T) == pytest.approx(-math.pi * (1 - cos_t))


# -- invariants ----------------------------------------------------------------

@settings(max_examples=200)
@given(transmissivity, angles, angles, st.floats(-10, 10))
def test_gauge_shift(T, chi1, chi2, delta):
    if abs(math.cos((chi2 - chi1) / 2)) < 1e-3 and T > 0.99:
        return
    a = phase_decomposition(T, chi1, chi2)
    b = phase_decomposition(T, chi1 + delta, chi2 + delta)
    assert wrapped(b.pancharatnam - a.pancharatnam - delta) < 1e-10
    assert wrapped(b.dynamical - a.dynamical - delta) < 1e-10
    assert wrapped(b.geometric - a.geometric) < 1e-10


@given(st.floats(0.0, 0.95), st.floats(-9, 9), st.floats(-9, 9))
def test_geometric_depends_only_on_dchi(T, dchi, shift):
    a = phase_decomposition(T, *compensated_shifts(T, dchi))
    b = phase_decomposition(T, shift, shift + dchi)
    assert wrapped(a.geometric - b.geometric) < 1e-10


@given(st.floats(0.0, 0.95), st.floats(-9, 9))
def test_antisymmetry(T, dchi):
    plus = phase_decomposition(T, *compensated_shifts(T, dchi)).geometric
    minus = phase_decomposition(T, *compensated_shifts(T, -dchi)).geometric
    assert wrapped(plus + minus) < 1e-10


@given(transmissivity)
def test_null_cases(T):
    assert phase_decomposition(T, *compensated_shifts(T, 0.0)).geometric == pytest.approx(0, abs=1e-15)
    assert phase_decomposition(0.0, *compensated_shifts(0.0, 3.3 * T)).geometric == pytest.approx(0, abs=1e-15)


@given(st.floats(-math.pi + 1e-6, math.pi - 1e-6))
def test_t1_geometric_vanishes_inside_principal_range(dchi):
    assert abs(phase_decomposition(1.0, *compensated_shifts(1.0, dchi)).geometric) < 1e-12


@given(transmissivity, angles, angles)
def test_norm_contract(T, chi1, chi2):
    s = evolve_second_loop(T, chi1, chi2)
    assert abs(s.norm2() - (1 + T) / 2) < 1e-15
    assert 0 <= s.norm2() <= 1 + 1e-15


@given(transmissivity, angles, angles)
def test_operator_consistency(T, chi1, chi2):
    direct = evolve_second_loop(T, chi1, chi2)
    chain = run_elements(PathState.p(), [SplitToQ(), Attenuate(T), PhaseShift(chi1, chi2)])
    assert np.allclose(direct.as_array(), chain.as_array(), atol=1e-12, rtol=0)


def test_unabsorbed_evolution_preserves_norm():
    s = run_elements(PathState.p(), [SplitToQ(), PhaseShift(0.3, 2.0)])
    assert abs(s.norm2() - 1.0) < 1e-12


@given(transmissivity, st.floats(0.05, 0.95))
def test_cyclic_alignment_independent_of_T(T, s1):
    d = phase_decomposition(T, -s1 * 2 * math.pi, (1 - s1) * 2 * math.pi)
    assert wrapped(d.pancharatnam + 2 * math.pi * s1) < 1e-12
