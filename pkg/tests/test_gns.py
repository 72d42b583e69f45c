import json
import pathlib

import numpy as np
import pytest

from ergodica.algebra import UnitizedElement, embed, ket_bra
from ergodica.dynamics import identity_endomorphism
from ergodica.gns import (HaarProductState, StabilityError, StatePositivityError,
                          StateFunctional, boolean_family_state, check_state, eigvec_from_algebra_isometry,
                          fourier_coefficients, gns_build, infinity_state, invariance_residual,
                          isometry_defect, lemma_mle_inequality_check, mixture, point_mass_direct,
                          point_mass_wiener, vacuum_state)
from ergodica.modes import ModeElement
from ergodica.systems import (GOLDEN, boolean_shift, classical_rotation, rotation_block_variant,
                              rotation_tensor_boolean)

ORACLE = json.loads((pathlib.Path(__file__).parent / "data" / "oracle_values.json").read_text())


@pytest.fixture(scope="module")
def boolean():
    return boolean_shift(8)


@pytest.fixture(scope="module")
def rotation():
    return classical_rotation(GOLDEN, 3)


def test_states_on_boolean_pairs(boolean):
    b = boolean.basis
    x = UnitizedElement(ket_bra(b, (), ()) + 2 * ket_bra(b, (1,), (1,)), 0.25, b)
    assert vacuum_state(b)(x) == pytest.approx(1.25)
    assert infinity_state(b)(x) == pytest.approx(0.25)
    assert boolean_family_state(b, 0.5)(x) == pytest.approx(0.75)
    assert mixture([vacuum_state(b), infinity_state(b)], [0.5, 0.5])(x) == pytest.approx(0.75)
    with pytest.raises(ValueError, match="weights"):
        mixture([vacuum_state(b)], [0.9])


def test_shipped_states_are_states_and_invariant(boolean):
    for s in boolean.invariant_states:
        rep = check_state(s, boolean.probes, boolean.one)
        assert rep["ok"], (s.label, rep)
        assert invariance_residual(s, boolean.endo, boolean.probes) <= 1e-12


def test_generic_sesq_matches_density_formula(boolean):
    s = vacuum_state(boolean.basis)
    plain = StateFunctional(lambda x: s(x))
    gens = boolean.gns_generators[:7]
    np.testing.assert_allclose(plain.sesq(gens, gens), s.sesq(gens, gens), atol=1e-14)


def test_infinity_gns_is_one_dimensional(boolean):
    g = gns_build(boolean.gns_generators, infinity_state(boolean.basis), boolean.endo)
    assert g.dim == 1
    np.testing.assert_allclose(g.covariant_op, [[1.0]])
    x = UnitizedElement(ket_bra(boolean.basis, (2,), ()), -0.5j, boolean.basis)
    np.testing.assert_allclose(g.rep(x), [[-0.5j]], atol=1e-15)
    assert isometry_defect(g) == 0.0
    assert abs(np.linalg.norm(g.cyclic_vector) - 1) < 1e-12


def test_vacuum_gns_recovers_defining_representation(boolean):
    b = boolean.basis
    g = gns_build(boolean.gns_generators, vacuum_state(b), boolean.endo)
    assert g.dim == b.dim
    rng = np.random.default_rng(0)
    x = UnitizedElement(rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim)), 0.7, b)
    # oracle: vectors b_i e_Omega in the window and the window matrix of x
    X = embed(x)
    vecs = np.column_stack([embed(gen)[:, 0] for gen in g.generators])
    T_oracle = vecs.conj().T @ X @ vecs
    T = vacuum_state(b).sesq(g.generators, [x @ gen for gen in g.generators])
    np.testing.assert_allclose(T, T_oracle, atol=1e-12)
    np.testing.assert_allclose(np.linalg.svd(g.rep(x), compute_uv=False),
                               np.linalg.svd(X, compute_uv=False), atol=1e-12)


def test_gns_invariants_hold(boolean):
    for s in boolean.invariant_states:
        g = gns_build(boolean.gns_generators, s, boolean.endo)
        xi = g.cyclic_vector
        assert abs(np.linalg.norm(xi) - 1) <= 1e-12
        assert np.linalg.norm(g.covariant_op @ xi - xi) <= 1e-10
        assert np.linalg.norm(g.covariant_op, 2) <= 1 + 1e-10
        assert g.gram_eigenvalues.min() >= -1e-10
        for p in boolean.probes:
            lhs = g.covariant_op @ g.vector_of(p)
            assert np.linalg.norm(lhs - g.vector_of(boolean.endo(p))) <= 1e-10


def test_boolean_vacuum_isometry_defect_on_probes(boolean):
    g = gns_build(boolean.gns_generators, vacuum_state(boolean.basis), boolean.endo)
    assert isometry_defect(g, boolean.probes) <= 1e-8
    # the window edge makes V non-isometric on the full span
    assert isometry_defect(g) == pytest.approx(1.0)


def test_haar_rotation_gns_is_diagonal(rotation):
    g = gns_build(rotation.gns_generators, rotation.invariant_states[0], rotation.endo)
    M = 3
    assert g.dim == 2 * M + 1
    expected = np.exp(2j * np.pi * np.arange(-M, M + 1) * GOLDEN)
    # generators z^m are orthonormal under Haar, so V is diagonal in their classes
    np.testing.assert_allclose(g.coords @ g.coords.conj().T, np.eye(2 * M + 1), atol=1e-12)
    V_gen = g.coords @ g.covariant_op @ g.coords.conj().T
    np.testing.assert_allclose(V_gen, np.diag(expected), atol=1e-12)
    assert isometry_defect(g) <= 1e-10


def test_haar_rotation_state_kills_nonzero_modes(rotation):
    haar = rotation.invariant_states[0]
    for l in range(-3, 4):
        val = haar(ModeElement.scalar_poly({l: 1.0}))
        assert val == (1.0 if l == 0 else 0.0)


def test_point_mass_direct_trivial_examples():
    V = np.diag([1.0, np.exp(2j * np.pi * GOLDEN)])
    assert point_mass_direct(V, [1, 0], 0.0).mass == pytest.approx(1.0)
    est = point_mass_direct(V, np.array([1, 1]) / np.sqrt(2), 0.0)
    assert est.mass == pytest.approx(0.5)
    assert est.method == "direct" and 0 <= est.theta < 2 * np.pi


def test_point_mass_direct_flags_near_miss():
    # eigenvalue within sqrt(tol) of lam but no kernel vector at tol
    V = np.array([[1.0 + 1e-8]])
    est = point_mass_direct(V, [1.0], 0.0, tol=1e-12)
    assert est.defective and est.mass == 0.0


def test_rotation_eigenvector_has_mass_one(rotation):
    g = gns_build(rotation.gns_generators, rotation.invariant_states[0], rotation.endo)
    xi = g.vector_of(ModeElement.scalar_poly({1: 1.0}))
    # V has eigenvalue e^{2 pi i theta_rot} = e^{-i theta} at theta = -2 pi theta_rot
    theta = -2 * np.pi * GOLDEN
    assert point_mass_direct(g, xi, theta).mass == pytest.approx(1.0, abs=1e-12)
    assert point_mass_direct(g, xi, -theta).mass == pytest.approx(0.0, abs=1e-12)


def test_wiener_identity_is_exact():
    xi = np.array([0.3, 0.4j, -1.2])
    for N in (1, 7, 100):
        assert point_mass_wiener(np.eye(3), xi, 0.0, N).raw == pytest.approx(np.vdot(xi, xi).real)


def test_wiener_off_resonance_geometric_bound():
    alpha, theta = 0.2, 1.0
    V = np.array([[np.exp(2j * np.pi * alpha)]])
    for N in (10, 100, 1000):
        est = point_mass_wiener(V, [1.0], theta, N)
        bound = 2 / (N * abs(1 - np.exp(1j * (theta + 2 * np.pi * alpha))))
        assert abs(est.raw) <= bound
    assert point_mass_wiener(V, [1.0], theta, 1000).raw == pytest.approx(ORACLE["wiener_offres"], rel=1e-9)


def test_fourier_coefficients_are_powers():
    rng = np.random.default_rng(2)
    V = rng.normal(size=(3, 3)) / 3
    xi = rng.normal(size=3)
    c = fourier_coefficients(V, xi, 4)
    assert c[3] == pytest.approx(xi @ np.linalg.matrix_power(V, 3) @ xi)


def test_wiener_agrees_with_direct(rotation):
    g = gns_build(rotation.gns_generators, rotation.invariant_states[0], rotation.endo)
    xi = g.vector_of(ModeElement.scalar_poly({1: 0.6, 0: 0.8}))
    for theta in (0.0, -2 * np.pi * GOLDEN, 1.0):
        d = point_mass_direct(g, xi, theta).mass
        w = point_mass_wiener(g, xi, theta, 10_000).mass
        assert abs(d - w) <= 1e-3


def test_total_direct_mass_bounded(rotation):
    g = gns_build(rotation.gns_generators, rotation.invariant_states[0], rotation.endo)
    rng = np.random.default_rng(3)
    xi = g.vector_of(ModeElement.scalar_poly({m: rng.normal() for m in range(-3, 4)}))
    angles = -np.angle(np.linalg.eigvals(g.covariant_op))
    total = sum(point_mass_direct(g, xi, t).mass for t in angles)
    assert total <= np.vdot(xi, xi).real + 1e-8
    assert total == pytest.approx(np.vdot(xi, xi).real)


def test_eigvec_from_unit_is_cyclic_vector(boolean):
    g = gns_build(boolean.gns_generators, vacuum_state(boolean.basis), boolean.endo)
    v, res = eigvec_from_algebra_isometry(g, boolean.one, 1.0)
    np.testing.assert_allclose(v, g.cyclic_vector, atol=1e-14)
    assert res <= 1e-10


def test_eigvec_from_rotation_monomials(rotation):
    g = gns_build(rotation.gns_generators, rotation.invariant_states[0], rotation.endo)
    for l in (1, -2):
        e = rotation.eigen_element(l)
        v, res = eigvec_from_algebra_isometry(g, e.u, e.lam)
        assert res <= 1e-12
        assert point_mass_direct(g, v, -np.angle(e.lam)).mass == pytest.approx(1.0)
        # co-isometry case: u* is an eigen-element for conj(lam)
        w, res_star = eigvec_from_algebra_isometry(g, e.u.adjoint(), np.conj(e.lam))
        assert res_star <= 1e-12
        assert abs(np.vdot(v, w)) <= 1e-12


def test_eigvec_rejects_non_eigen(rotation):
    g = gns_build(rotation.gns_generators, rotation.invariant_states[0], rotation.endo)
    with pytest.raises(ValueError, match="isometry"):
        eigvec_from_algebra_isometry(g, ModeElement.scalar_poly({1: 2.0}), 1.0)
    with pytest.raises(ValueError, match="eigen-element"):
        eigvec_from_algebra_isometry(g, ModeElement.scalar_poly({1: 1.0}), 1.0)


def test_positivity_error_for_non_positive_functional(boolean):
    b = boolean.basis
    vac = vacuum_state(b)
    bad = StateFunctional(lambda x: -vac(x))
    with pytest.raises(StatePositivityError, match="not positive"):
        gns_build(boolean.gns_generators[:5], bad, boolean.endo)


def test_stability_error_for_unstable_span(boolean):
    gens = [boolean.one, UnitizedElement(ket_bra(boolean.basis, (0,), ()), 0, boolean.basis)]
    gens.append(gens[1].adjoint())
    with pytest.raises(StabilityError):
        gns_build(gens, vacuum_state(boolean.basis), boolean.endo)


def test_identity_endomorphism_gns_summary(boolean):
    g = gns_build(boolean.gns_generators, vacuum_state(boolean.basis), identity_endomorphism())
    s = json.loads(g.to_json())
    assert s["dim"] == boolean.basis.dim
    assert s["isometry_defect"] <= 1e-12
    np.testing.assert_allclose(np.array(s["eigenvalues"])[:, 0], 1.0, atol=1e-10)


def test_haar_product_sesq_matches_generic():
    rb = rotation_tensor_boolean(GOLDEN, 1, 5)
    psi = HaarProductState(boolean_family_state(rb.basis, 0.5))
    plain = StateFunctional(lambda f: psi(f))
    gens = rb.gns_generators[::7]
    np.testing.assert_allclose(psi.sesq(gens, gens), plain.sesq(gens, gens), atol=1e-13)


def test_lemma_unit_at_lambda_one(boolean):
    rep = lemma_mle_inequality_check(boolean, boolean.one, 1.0, boolean.invariant_states, 20)
    assert rep.lhs == pytest.approx(1.0)
    assert rep.rhs_max == pytest.approx(1.0)
    assert rep.passed


def test_lemma_boolean_at_i_has_zero_lhs():
    b = boolean_shift(40)
    x = UnitizedElement(ket_bra(b.basis, (0,), (0,)), 0, b.basis)
    rep = lemma_mle_inequality_check(b, x, 1j, b.invariant_states, 30)
    assert rep.lhs <= 1e-6
    assert rep.passed
    assert all(r <= 1 / n + 1e-12 for n, r in enumerate(rep.rhs_trace, start=1))


def test_lemma_rotation_monomial():
    rot = rotation_block_variant(GOLDEN, 2)
    e = rot.eigen_element(1)
    rep = lemma_mle_inequality_check(rot, e.u, e.lam, rot.invariant_states, 200)
    # the Haar coefficient of z^1 vanishes, so the right side stays at zero
    assert rep.lhs == pytest.approx(1.0)
    assert rep.rhs_max <= 1e-14
    assert rep.passed
