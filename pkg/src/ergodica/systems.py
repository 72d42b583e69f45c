"""Concrete dynamical systems with their states, expectations and bound checks.

* :func:`classical_rotation` - trigonometric polynomials under ``z -> e^{2 pi i theta} z``.
* :func:`monotone_shift` - monotone Fock space, conjugation by the tuple shift ``J -> J + 1``.
* :func:`boolean_shift` - boolean Fock space, conjugation by ``e_Omega -> e_Omega``, ``e_j -> e_{j+1}``.
* :func:`rotation_tensor_boolean` - rotation tensored with the boolean shift.
* :func:`rotation_block_variant` - the same with the boolean factor replaced by
  its fixed-point block ``C P_Omega + C 1``, where the dynamics is exactly
  multiplicative and arbitrarily long runs are meaningful.

Shifts are truncated to the window ``[-L, L]``: vectors leaving the window
are dropped (never wrapped around). Each bundle records a ``safe_horizon``
``L - probe_radius - 1`` beyond which Cesaro runs raise ``HorizonError``.
"""
from __future__ import annotations

import configparser
import threading
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .algebra import (DENSE_LIMIT, UnitizedElement, boolean_basis, elem_norm, ket_bra,
                      monotone_basis, monotone_creator, trivial_basis, vacuum_block_basis)
from .dynamics import ConjugationEndomorphism, HorizonError, cesaro
from .gns import (HaarProductState, boolean_family_state, infinity_state, vacuum_state)
from .modes import ModeElement, ModeEndomorphism, mode_phases

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
OMEGA = ()


class LazyList(Sequence):
    """Sequence materialized on first access.

    Generator sets of wide windows cost hundreds of megabytes; bundles that
    never build a GNS representation should not pay for them.
    """

    def __init__(self, build):
        self._build = build
        self._items = None
        self._lock = threading.Lock()

    def _get(self):
        with self._lock:
            if self._items is None:
                self._items = list(self._build())
        return self._items

    def __getitem__(self, k):
        return self._get()[k]

    def __len__(self):
        return len(self._get())


@dataclass(frozen=True)
class EigenElement:
    """``Phi(u) = lam u`` with ``u`` of the given kind."""

    lam: complex
    u: object
    kind: str
    label: str = ""
    inverse: object = None


@dataclass
class SystemBundle:
    """A truncated dynamical system with everything the checks need.

    Attributes
    ----------
    name : str
    basis : FockBasis
    endo : Endomorphism
    invariant_states : list of StateFunctional
        Extreme invariant states and midpoints.
    exact_E1 : callable or None
        Closed-form expectation onto the fixed points (``None`` when the
        averages do not converge in norm).
    eigen_elements : list of EigenElement
    safe_horizon : int or None
        ``None`` for exactly multiplicative systems.
    probes : sequence
        Elements used for invariance and contract checks.
    gns_generators : sequence
        *-closed, ``endo``-stable generating set containing 1.
    """

    name: str
    basis: object
    endo: object
    invariant_states: list
    exact_E1: object
    eigen_elements: list
    safe_horizon: object
    probes: Sequence
    gns_generators: Sequence
    params: dict = field(default_factory=dict)
    fixed_point_basis: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def one(self):
        if self.params.get("modes"):
            return ModeElement.unit(self.basis)
        return UnitizedElement.unit(self.basis)

    @property
    def theta(self):
        return self.params.get("theta")

    def exact_E_lambda(self, l):
        """Closed-form projection onto the ``e^{2 pi i l theta}``-eigenspace (mode systems)."""
        if not self.params.get("modes"):
            raise ValueError(f"{self.name} has no rotation modes")
        inner = self.params["coefficient_E1"]

        def E(f):
            return ModeElement.monomial(l, inner(f.coefficient(l)))
        return E

    def eigen_element(self, l):
        for e in self.eigen_elements:
            if e.label == f"u_{l}":
                return e
        raise KeyError(f"no eigen-element u_{l}")


def _shift_matrix(basis, sigma_of_label):
    """Partial permutation ``V e_J = e_{sigma(J)}`` (dropped when sigma gives None)."""
    rows, cols = [], []
    for c, J in enumerate(basis.states):
        K = sigma_of_label(J)
        if K is not None:
            rows.append(basis.index(K))
            cols.append(c)
    V = sp.csr_array((np.ones(len(rows), np.complex128), (rows, cols)), shape=(basis.dim, basis.dim))
    return V if basis.dim > DENSE_LIMIT else V.toarray()


def _tuple_shift(L):
    def sigma(J):
        if J and J[-1] + 1 > L:
            return None
        return tuple(j + 1 for j in J)
    return sigma


def _horizon(L, probe_radius):
    h = L - probe_radius - 1
    if h < 1:
        raise ValueError(f"window L = {L} leaves no safe horizon for probe radius {probe_radius}")
    return h


def _elem(basis, compact, scalar=0.0):
    return UnitizedElement(compact, scalar, basis)


def boolean_E1(x):
    """``(a, b) -> (<a e_Omega, e_Omega> P_Omega, b)``."""
    a = x.compact
    if sp.issparse(a):
        out = sp.csr_array(([a[0, 0]], ([0], [0])), shape=a.shape)
    else:
        out = np.zeros_like(a)
        out[0, 0] = a[0, 0]
    return UnitizedElement._new(out, x.scalar, x.basis)


def _window_rank_ones(basis, radius):
    labels = [OMEGA] + [(j,) for j in range(-radius, radius + 1)]
    return [_elem(basis, ket_bra(basis, r, c)) for r in labels for c in labels]


def _boolean_generators(basis):
    gens = [UnitizedElement.unit(basis)]
    for J in basis.states:
        gens.append(_elem(basis, ket_bra(basis, J, OMEGA)))
        if J != OMEGA:
            gens.append(_elem(basis, ket_bra(basis, OMEGA, J)))
    return gens


def boolean_shift(L, probe_radius=1):
    """Boolean shift ``Ad_V`` with ``V e_Omega = e_Omega``, ``V e_j = e_{j+1}``, truncated at ``L``."""
    if L < 4:
        raise ValueError("boolean_shift needs L >= 4")
    basis = boolean_basis(L)
    horizon = _horizon(L, probe_radius)
    V = _shift_matrix(basis, _tuple_shift(L))
    endo = ConjugationEndomorphism(V, basis, label=f"boolean_shift(L={L})", safe_horizon=horizon)
    states = [vacuum_state(basis), infinity_state(basis), boolean_family_state(basis, 0.5)]
    P = _elem(basis, ket_bra(basis, OMEGA, OMEGA))
    one = UnitizedElement.unit(basis)
    w = 2.0 * P - one
    eig = [EigenElement(1.0, one, "unitary", "u_0", one), EigenElement(1.0, w, "unitary", "w", w)]
    return SystemBundle(
        "boolean", basis, endo, states, boolean_E1, eig, horizon,
        probes=_window_rank_ones(basis, probe_radius) + [one],
        gns_generators=LazyList(lambda: _boolean_generators(basis)),
        params={"L": L, "probe_radius": probe_radius},
        fixed_point_basis=[P, one])


def monotone_shift(L, p=2, probe_radius=1):
    """Monotone shift: conjugation by the truncated tuple shift ``e_J -> e_{J+1}``."""
    if p < 2:
        raise ValueError("monotone_shift needs depth p >= 2 (products m_l m+_l act on depth 2)")
    if L < 4:
        raise ValueError("monotone_shift needs L >= 4")
    basis = monotone_basis(L, p)
    horizon = _horizon(L, probe_radius)
    V = _shift_matrix(basis, _tuple_shift(L))
    endo = ConjugationEndomorphism(V, basis, label=f"monotone_shift(L={L}, p={p})",
                                   safe_horizon=horizon)
    states = [vacuum_state(basis), infinity_state(basis), boolean_family_state(basis, 0.5)]
    one = UnitizedElement.unit(basis)
    sparse = basis.dim > DENSE_LIMIT
    gens = [one]
    for J in basis.states:
        if len(J) <= 1:
            gens.append(_elem(basis, ket_bra(basis, J, OMEGA, sparse=sparse)))
            if J != OMEGA:
                gens.append(_elem(basis, ket_bra(basis, OMEGA, J, sparse=sparse)))
    probes = [_elem(basis, monotone_creator(basis, j)) for j in range(-probe_radius, probe_radius + 1)]
    probes += [x.adjoint() for x in probes] + [one]
    return SystemBundle(
        "monotone", basis, endo, states, None, [EigenElement(1.0, one, "unitary", "u_0", one)],
        horizon, probes, gens, params={"L": L, "p": p, "probe_radius": probe_radius},
        fixed_point_basis=[_elem(basis, ket_bra(basis, OMEGA, OMEGA, sparse=sparse)), one])


def number_projection(bundle, l):
    """``m_l m+_l`` on a monotone bundle."""
    m = _elem(bundle.basis, monotone_creator(bundle.basis, l))
    return m.adjoint() @ m


def _rational_warning(theta, M):
    frac = Fraction(theta).limit_denominator(2 * M)
    if abs(theta - frac.numerator / frac.denominator) < 1e-12:
        msg = (f"theta = {theta} is rational with denominator {frac.denominator} <= 2M; "
               "eigenvalues of different modes collide")
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        return [msg]
    return []


def _check_theta(theta, M):
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if M < 1:
        raise ValueError("M must be >= 1")


def _mode_bundle(name, theta, M, basis, base, states, coefficient_E1, gens_per_mode, horizon,
                 params, flags):
    endo = ModeEndomorphism(theta, base, basis, M, label=f"{name}(theta={theta:.12g})")
    one = UnitizedElement.unit(basis)
    eig = []
    for l, ph in zip(range(-M, M + 1), mode_phases(theta, range(-M, M + 1))):
        u = ModeElement.monomial(l, one)
        eig.append(EigenElement(complex(ph), u, "unitary", f"u_{l}", u.adjoint()))
    gens = LazyList(lambda: [ModeElement.monomial(m, x) for m in range(-M, M + 1)
                             for x in gens_per_mode])
    probes = LazyList(lambda: [ModeElement.monomial(m, x) for m in range(-M, M + 1)
                               for x in gens_per_mode])

    def E1(f):
        return ModeElement.monomial(0, coefficient_E1(f.coefficient(0)))
    params = dict(params, theta=theta, M=M, modes=True, coefficient_E1=coefficient_E1)
    return SystemBundle(name, basis, endo, states, E1, eig, horizon, probes, gens, params,
                        warnings=flags)


def classical_rotation(theta=GOLDEN, M=3):
    """Rotation ``z -> e^{2 pi i theta} z`` on trigonometric polynomials of degree ``<= M``.

    The only invariant state is the Haar state (mode-0 coefficient).
    """
    _check_theta(theta, M)
    flags = _rational_warning(theta, M)
    basis = trivial_basis()
    haar = HaarProductState(infinity_state(basis), "haar")
    return _mode_bundle("rotation", theta, M, basis, None, [haar], lambda x: x,
                        [UnitizedElement.unit(basis)], None, {}, flags)


def rotation_tensor_boolean(theta=GOLDEN, M=2, L=6, probe_radius=1):
    """``alpha(f)(z) = s(f(e^{2 pi i theta} z))`` with ``s`` the boolean shift."""
    _check_theta(theta, M)
    flags = _rational_warning(theta, M)
    b = boolean_shift(L, probe_radius)
    states = [HaarProductState(boolean_family_state(b.basis, t), f"psi_{t:g}") for t in (0.0, 0.5, 1.0)]
    bundle = _mode_bundle("rotation-boolean", theta, M, b.basis, b.endo, states, boolean_E1,
                          b.gns_generators, b.safe_horizon,
                          {"L": L, "probe_radius": probe_radius}, flags)
    bundle.probes = [ModeElement.monomial(m, x) for m in range(-M, M + 1)
                     for x in _window_rank_ones(b.basis, probe_radius) + [b.one]]
    P = ModeElement.monomial(0, b.fixed_point_basis[0])
    w = 2.0 * P - bundle.one
    bundle.eigen_elements.append(EigenElement(1.0, w, "unitary", "w", w))
    bundle.fixed_point_basis = [P, bundle.one]
    return bundle


def rotation_block_variant(theta=GOLDEN, M=2):
    """Rotation tensored with the fixed-point block ``C P_Omega + C 1`` of the boolean shift.

    Coefficients ``(c, b)`` stand for ``c P_Omega + b 1``. The dynamics is
    exactly multiplicative, so there is no horizon.
    """
    _check_theta(theta, M)
    flags = _rational_warning(theta, M)
    basis = vacuum_block_basis()
    states = [HaarProductState(boolean_family_state(basis, t), f"psi_{t:g}") for t in (0.0, 0.5, 1.0)]
    P = _elem(basis, [[1.0]])
    one = UnitizedElement.unit(basis)
    bundle = _mode_bundle("rotation-block", theta, M, basis, None, states, lambda x: x,
                          [P, one], None, {}, flags)
    Pm = ModeElement.monomial(0, P)
    w = 2.0 * Pm - bundle.one
    bundle.eigen_elements.append(EigenElement(1.0, w, "unitary", "w", w))
    bundle.fixed_point_basis = [Pm, bundle.one]
    return bundle


def reduce_to_block(f):
    """Map a rotation-boolean element to the block variant via ``(a, b) -> (a_{Omega Omega}, b)``."""
    basis = vacuum_block_basis()
    compact = f.compact[:, :1, :1].copy()
    return ModeElement._new(f.modes, compact, f.scalar.copy(), basis)


# ---------------------------------------------------------------------------
# bound checks


@dataclass
class BoundReport:
    """Largest observed value against a bound, with the violations (slack applied)."""

    name: str
    n: int
    lam: complex
    max_value: float
    bound: float
    slack: float
    violations: int
    samples: int
    details: dict = field(default_factory=dict)

    @property
    def max_ratio(self):
        return self.max_value / self.bound if self.bound > 0 else np.inf

    @property
    def passed(self):
        return self.violations == 0


def _require_horizon(bundle, n):
    h = bundle.safe_horizon
    if h is not None and n > h:
        raise HorizonError(f"n = {n} exceeds the safe horizon {h} of {bundle.name}")


def monotone_bound_check(bundle, l, lam, n, trials=100, seed=0, slack=1e-9):
    """Sample ``|<M_{a,lam}(n) xi, eta>|`` for ``a = m_l m+_l`` against ``4 / (n |lam - 1|)``.

    Unit vectors are complex Gaussian, supported on basis states whose
    sites stay within ``L - n - 1`` (so their orbits never reach the
    boundary). ``details`` also holds the vacuum value (against the sharper
    ``2 / (n |lam - 1|)``) and the operator norm of the compressed average.
    """
    lam = complex(lam)
    if abs(lam - 1) < 1e-3:
        raise ValueError("monotone_bound_check needs |lam - 1| >= 1e-3")
    _require_horizon(bundle, n)
    basis = bundle.basis
    R = bundle.params["L"] - n - 1
    idx = np.array([k for k, J in enumerate(basis.states) if all(abs(j) <= R for j in J)])
    Mn = cesaro(bundle.endo, number_projection(bundle, l), lam, n).embed()
    Mn = sp.csr_array(Mn)[idx][:, idx]
    opnorm = elem_norm(UnitizedElement(Mn, 0.0))
    Mn = Mn.toarray()
    rng = np.random.default_rng(seed)
    bound = 4.0 / (n * abs(lam - 1))
    vals = np.empty(trials)
    for t in range(trials):
        xi = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
        eta = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
        xi /= np.linalg.norm(xi)
        eta /= np.linalg.norm(eta)
        vals[t] = abs(np.vdot(eta, Mn @ xi))
    vac = abs(Mn[0, 0])
    details = {"vacuum_value": float(vac), "vacuum_bound": 2.0 / (n * abs(lam - 1)),
               "operator_norm": opnorm, "seed": seed, "support_states": int(len(idx))}
    violations = int(np.sum(vals > bound + slack)) + int(opnorm > bound + slack)
    return BoundReport("monotone_matrix_element", n, lam, float(max(vals.max(initial=0.0), opnorm)),
                       bound, slack, violations, trials + 1, details)


def _common_rank_one(f):
    """Return ``(row, col)`` indices when all coefficients are multiples of one matrix unit."""
    if np.any(f.scalar != 0):
        return None
    nz = np.argwhere(np.any(f.compact != 0, axis=0))
    if len(nz) != 1:
        return None
    return tuple(int(i) for i in nz[0])


def sqrt_n_bound_check(bundle, f, n, lam=1.0, grid=256, slack=1e-9):
    """Check ``max_z ||M_{f,lam}(n)(z)|| <= ||f||_inf / sqrt(n)`` on a grid.

    ``f`` must be ``g (x) |e_j><e_i|`` with a scalar trigonometric
    polynomial ``g`` and ``(i, j) != (Omega, Omega)``. ``||f||_inf`` is the
    certified upper bracket of :meth:`ModeElement.sup_norm`.
    """
    rc = _common_rank_one(f)
    if rc is None or rc == (0, 0):
        raise ValueError("f must be a scalar polynomial times one matrix unit other than P_Omega")
    _require_horizon(bundle, n)
    Mn = cesaro(bundle.endo, f, lam, n)
    norms = Mn.grid_norms(grid)
    fnorm = f.sup_norm(grid)[1]
    bound = fnorm / np.sqrt(n)
    return BoundReport("sqrt_n", n, complex(lam), float(norms.max()), bound, slack,
                       int(np.sum(norms > bound + slack)), grid,
                       {"f_sup_upper": fnorm, "rank_one": rc})


# ---------------------------------------------------------------------------
# construction from parameters / config files


SYSTEM_KINDS = ("rotation", "monotone", "boolean", "rotation-boolean", "rotation-block")


def build_system(kind, L=None, p=2, M=None, theta=None, probe_radius=1):
    """Dispatch on ``kind`` with defaults suited to each system."""
    theta = GOLDEN if theta is None else float(theta)
    if kind == "rotation":
        return classical_rotation(theta, 3 if M is None else M)
    if kind == "monotone":
        return monotone_shift(40 if L is None else L, p, probe_radius)
    if kind == "boolean":
        return boolean_shift(128 if L is None else L, probe_radius)
    if kind == "rotation-boolean":
        return rotation_tensor_boolean(theta, 2 if M is None else M, 6 if L is None else L,
                                       probe_radius)
    if kind == "rotation-block":
        return rotation_block_variant(theta, 2 if M is None else M)
    raise ValueError(f"unknown system kind {kind!r}; choose from {', '.join(SYSTEM_KINDS)}")


def read_config(path):
    """Read ``key = value`` lines (``#`` comments, optional ``[section]`` headers) into a dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[main]\n" + text
    parser.read_string(text)
    out = {}
    for section in parser.sections():
        out.update(parser[section])
    return out
