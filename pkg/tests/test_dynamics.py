import json
import pathlib

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodica.algebra import UnitizedElement, boolean_basis, ket_bra
from ergodica.dynamics import (CesaroAccumulator, ConjugationEndomorphism, ConvergenceDiagnostics,
                               E_lambda_coiso, E_lambda_invertible, E_lambda_iso, Endomorphism,
                               HorizonError, PreconditionError, cesaro, ergodic_projection_E1,
                               identity_endomorphism, necessary_condition_check,
                               projection_properties_check)
from ergodica.modes import ModeElement
from ergodica.systems import (GOLDEN, boolean_shift, classical_rotation, monotone_shift,
                              rotation_tensor_boolean)

ORACLE = json.loads((pathlib.Path(__file__).parent / "data" / "oracle_values.json").read_text())


@pytest.fixture(scope="module")
def boolean():
    return boolean_shift(20)


def rank_one(bundle, row, col):
    return UnitizedElement(ket_bra(bundle.basis, row, col), 0, bundle.basis)


def test_cesaro_of_unit(boolean):
    one = UnitizedElement.unit(boolean.basis)
    for n in (1, 5, 17):
        assert cesaro(boolean.endo, one, 1.0, n).allclose(one, atol=0)
    # geometric sum 1 - i - 1 + i
    assert cesaro(boolean.endo, one, 1j, 4).norm() < 1e-15


def test_boolean_rank_one_average_matches_oracle():
    b = boolean_shift(128)
    x = rank_one(b, (0,), (0,))
    for n, expected in ORACLE["boolean_rank_one_norms"].items():
        M = cesaro(b.endo, x, 1.0, int(n))
        assert M.norm() == pytest.approx(expected, abs=1e-15)
        diag = np.diag(M.dense())
        assert np.count_nonzero(diag) == int(n)


def test_boolean_creator_average_matches_oracle(boolean):
    x = rank_one(boolean, (1,), ())
    M = cesaro(boolean.endo, x, 1j, 9)
    assert M.norm() == pytest.approx(ORACLE["boolean_creator_average_norm"], rel=1e-13)


def test_cesaro_errors(boolean):
    one = UnitizedElement.unit(boolean.basis)
    with pytest.raises(ValueError, match="deviates"):
        cesaro(boolean.endo, one, 1.001, 3)
    with pytest.raises(ValueError):
        cesaro(boolean.endo, one, 1.0, 0)
    with pytest.raises(HorizonError):
        cesaro(boolean.endo, one, 1.0, boolean.safe_horizon + 1)


@given(st.integers(1, 40), st.floats(0, 2 * np.pi), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_accumulator_identity(n, angle, seed):
    b = boolean_shift(60)
    rng = np.random.default_rng(seed)
    a = UnitizedElement(rng.normal(size=(b.basis.dim,) * 2) * 0.1, rng.normal(), b.basis)
    lam = np.exp(1j * angle)
    acc = CesaroAccumulator(b.endo, a, lam).advance(n)
    Mn = acc.mean()
    acc.step()
    Mn1 = acc.mean()
    phi_n1 = b.endo.power(a, n)
    lhs = Mn1 - (1 - 1 / (n + 1)) * Mn
    rhs = lam ** (-n) * phi_n1 / (n + 1)
    assert (lhs - rhs).norm() < 1e-13


@given(st.integers(1, 30), st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_averages_are_contractive(n, seed):
    b = boolean_shift(40)
    rng = np.random.default_rng(seed)
    d = b.basis.dim
    a = UnitizedElement(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)), rng.normal(), b.basis)
    lam = np.exp(2j * np.pi * rng.random())
    assert cesaro(b.endo, a, lam, n).norm() <= a.norm() + n * b.endo.mult_defect_bound + 1e-10


def test_kahan_sum_keeps_digits_over_long_runs():
    rot = classical_rotation(GOLDEN, 1)
    x = ModeElement.scalar_poly({1: 1.0})
    lam = np.exp(2j * np.pi * GOLDEN)
    # exact eigen-element: every term equals x, so the mean is x to rounding
    M = cesaro(rot.endo, x, lam, 20000)
    assert (M - x).norm() < 1e-10


def test_identity_endomorphism_diagnostics():
    b = boolean_basis(3)
    ident = identity_endomorphism()
    a = UnitizedElement(ket_bra(b, (1,), (0,)), 0.5, b)
    diag = necessary_condition_check(ident, a, 1.0, 64)
    ns = np.array([n for n, _ in diag.tail])
    np.testing.assert_allclose([v for _, v in diag.tail], a.norm() / ns)
    assert diag.verdict == "converged"


def test_identity_alternating_sum_closed_form():
    # M(n) = a/n for odd n and 0 for even n
    b = boolean_basis(3)
    ident = identity_endomorphism()
    a = UnitizedElement(ket_bra(b, (1,), (0,)), 0.5, b)
    for n in (1, 2, 7, 10):
        M = cesaro(ident, a, -1.0, n)
        expected = a / n if n % 2 else 0 * a
        assert (M - expected).norm() < 1e-15
    diag = necessary_condition_check(ident, a, -1.0, 64)
    # doubling residuals: M(1) - M(2) = a, then all later means vanish
    res = [r for _, r in diag.residual_trace]
    assert res[0] == pytest.approx(a.norm())
    assert max(res[1:]) < 1e-15


def test_necessary_condition_non_unit_lambda_diverges():
    b = boolean_basis(3)
    ident = identity_endomorphism()
    a = UnitizedElement.unit(b)
    diag = necessary_condition_check(ident, a, 0.5, 60)
    assert diag.verdict == "diverged"
    assert diag.tail_norm == pytest.approx(2.0 ** 60 / 60)


def test_monotone_creator_orbit_tail():
    mono = monotone_shift(10, 2)
    from ergodica.algebra import monotone_creator
    m0 = UnitizedElement(monotone_creator(mono.basis, 0), 0, mono.basis)
    diag = necessary_condition_check(mono.endo, m0, 1.0, 8)
    for n, v in diag.tail:
        assert v == pytest.approx(1.0 / n)


def test_diagnostics_json_round_trip(boolean):
    x = rank_one(boolean, (0,), (0,))
    _, diag = ergodic_projection_E1(boolean.endo, x, 16)
    back = ConvergenceDiagnostics.from_json(diag.to_json())
    assert back.verdict == diag.verdict
    assert back.residual_trace == [tuple(t) for t in json.loads(diag.to_json())["trace"]]
    ns = [n for n, _ in diag.residual_trace]
    assert ns == sorted(set(ns))
    assert set(json.loads(diag.to_json())) == {"lambda", "trace", "tail", "verdict"}


def test_ergodic_projection_boolean():
    b = boolean_shift(128)
    rng = np.random.default_rng(0)
    c = np.zeros((b.basis.dim,) * 2, complex)
    window = [0] + [b.basis.index((j,)) for j in range(-2, 3)]
    c[np.ix_(window, window)] = rng.normal(size=(6, 6))
    x = UnitizedElement(c, 0.3, b.basis)
    E, diag = ergodic_projection_E1(b.endo, x, 120, tol=0.05)
    assert (E - b.exact_E1(x)).norm() < 6 / 120 * x.norm()
    res = [r for _, r in diag.residual_trace]
    assert res[-1] < res[0]
    assert (b.endo(E) - E).norm() <= 0.05 * x.norm()


def test_fixed_point_is_returned_unchanged(boolean):
    P = rank_one(boolean, (), ())
    E, _ = ergodic_projection_E1(boolean.endo, P, 10)
    assert E.allclose(P, atol=1e-15)


def test_index_map_agrees_with_matrix_conjugation():
    b = boolean_basis(5)
    rng = np.random.default_rng(4)
    V = np.zeros((b.dim, b.dim))
    V[0, 0] = 1
    for j in range(-5, 5):
        V[b.index((j + 1,)), b.index((j,))] = 1
    fast = ConjugationEndomorphism(V, b)
    slow = ConjugationEndomorphism(V * (1 + 1e-300), b)
    assert fast.sigma is not None
    W = rng.normal(size=(b.dim, b.dim))
    general = ConjugationEndomorphism(W / np.linalg.norm(W, 2), b)
    assert general.sigma is None
    x = UnitizedElement(rng.normal(size=(b.dim, b.dim)), 0.2, b)
    np.testing.assert_array_equal(fast(x).dense(), V @ x.dense() @ V.T)
    xs = UnitizedElement(sp.csr_array(x.dense()), 0.2, b)
    np.testing.assert_allclose(fast(xs).dense(), fast(x).dense())
    assert (slow(x) - fast(x)).norm() < 1e-12


def test_endomorphism_contracts(boolean):
    samples = [rank_one(boolean, (0,), ()), rank_one(boolean, (), (1,)), UnitizedElement(
        ket_bra(boolean.basis, (2,), (2,)), 1j, boolean.basis)]
    rep = boolean.endo.check_contracts(samples, UnitizedElement.unit(boolean.basis))
    assert rep == {"unit": 0.0, "star": 0.0, "linearity": pytest.approx(0.0, abs=1e-15)}
    x, y = samples[0], samples[1]
    assert boolean.endo.multiplicativity_defect(x, y) == 0.0


# ----- eigenspace projections


@pytest.fixture(scope="module")
def rb():
    return rotation_tensor_boolean(GOLDEN, 2, 6)


def test_E_lambda_iso_fixes_u_and_kills_unit(rb):
    e = rb.eigen_element(1)
    assert (E_lambda_iso(rb.endo, e.u, e.u, e.lam, expectation=rb.exact_E1) - e.u).norm() < 1e-14
    assert E_lambda_iso(rb.endo, rb.one, e.u, e.lam, expectation=rb.exact_E1).norm() < 1e-14


def test_E_lambda_iso_rotation_monomial():
    rot = classical_rotation(GOLDEN, 3)
    e = rot.eigen_element(2)
    z2 = ModeElement.scalar_poly({2: 1.0})
    out = E_lambda_iso(rot.endo, z2, e.u, e.lam, expectation=rot.exact_E1)
    assert (out - z2).norm() < 1e-14
    # Cesaro-based E_1 converges to the same
    # the z^1 part leaves a geometric remainder of size at most 2 / (n |e^{-2 pi i theta} - 1|)
    n = 4000
    out_n = E_lambda_iso(rot.endo, z2 + ModeElement.scalar_poly({1: 1.0}), e.u, e.lam, n=n)
    bound = 2 / (n * abs(np.exp(-2j * np.pi * GOLDEN) - 1))
    assert (out_n - z2).norm() <= bound
    assert (out_n - z2).norm() > bound / 100


def test_E_lambda_coiso_mirrors(rb):
    e = rb.eigen_element(-1)
    u = e.u
    assert (E_lambda_coiso(rb.endo, u, u, e.lam, expectation=rb.exact_E1) - u).norm() < 1e-14
    assert E_lambda_coiso(rb.endo, rb.one, u, e.lam, expectation=rb.exact_E1).norm() < 1e-14
    rng = np.random.default_rng(1)
    d = rb.basis.dim
    x = ModeElement(range(-2, 3), rng.normal(size=(5, d, d)) / d, rng.normal(size=5), rb.basis)
    iso = E_lambda_iso(rb.endo, x, u, e.lam, expectation=rb.exact_E1)
    co = E_lambda_coiso(rb.endo, x, u, e.lam, expectation=rb.exact_E1)
    assert (iso - co).norm() < 1e-13


def test_E_lambda_invertible_scaled_unitary(rb):
    e = rb.eigen_element(1)
    rng = np.random.default_rng(2)
    d = rb.basis.dim
    x = ModeElement(range(-2, 3), rng.normal(size=(5, d, d)) / d, rng.normal(size=5), rb.basis)
    val, dist = E_lambda_invertible(rb.endo, x, 2 * e.u, 0.5 * e.u.adjoint(), e.lam,
                                    expectation=rb.exact_E1)
    iso = E_lambda_iso(rb.endo, x, e.u, e.lam, expectation=rb.exact_E1)
    assert (val - iso).norm() < 1e-8
    assert dist < 1e-8
    val2, _ = E_lambda_invertible(rb.endo, 2 * e.u, 2 * e.u, 0.5 * e.u.adjoint(), e.lam,
                                  expectation=rb.exact_E1)
    assert (val2 - 2 * e.u).norm() < 1e-13


def test_E_lambda_linear_in_x(rb):
    e = rb.eigen_element(2)
    rng = np.random.default_rng(3)
    d = rb.basis.dim
    x, y = (ModeElement(range(-2, 3), rng.normal(size=(5, d, d)) / d, rng.normal(size=5), rb.basis)
            for _ in range(2))
    E = lambda f: E_lambda_iso(rb.endo, f, e.u, e.lam, n=3)  # noqa: E731
    assert (E(x + 2j * y) - E(x) - 2j * E(y)).norm() < 1e-12


def test_E_lambda_preconditions(rb):
    e = rb.eigen_element(1)
    with pytest.raises(PreconditionError, match="isometry"):
        E_lambda_iso(rb.endo, rb.one, 2 * e.u, e.lam, expectation=rb.exact_E1)
    with pytest.raises(PreconditionError, match="Phi"):
        E_lambda_iso(rb.endo, rb.one, e.u, -e.lam, expectation=rb.exact_E1)
    with pytest.raises(PreconditionError, match="co-isometry"):
        E_lambda_coiso(rb.endo, rb.one, 0.5 * e.u, e.lam, expectation=rb.exact_E1)
    with pytest.raises(PreconditionError, match="inverse"):
        E_lambda_invertible(rb.endo, rb.one, 2 * e.u, e.u.adjoint(), e.lam, expectation=rb.exact_E1)
    with pytest.raises(ValueError, match="either n"):
        E_lambda_iso(rb.endo, rb.one, e.u, e.lam)


def test_projection_properties_boolean_E1():
    b = boolean_shift(10)
    rng = np.random.default_rng(5)
    d = b.basis.dim
    samples = [UnitizedElement(rng.normal(size=(d, d)), rng.normal(), b.basis) for _ in range(5)]
    rep = projection_properties_check(b.exact_E1, b.endo, 1.0, samples)
    assert rep.ok, rep.violations


def test_projection_properties_reports_violations():
    b = boolean_shift(10)
    x = UnitizedElement(ket_bra(b.basis, (0,), (0,)), 0, b.basis)
    not_projection = Endomorphism(lambda y: 2 * y)
    rep = projection_properties_check(not_projection, b.endo, 1.0, [x])
    assert not rep.ok
    assert any("idempotence" in v for v in rep.violations)
    assert any("eigenspace_range" in v for v in rep.violations)
