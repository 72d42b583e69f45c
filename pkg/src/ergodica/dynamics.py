"""Endomorphisms, Cesaro averages and eigenspace projections.

The averages are ``M(n) = (1/n) sum_{k<n} lam^{-k} Phi^k(a)``. They are
accumulated incrementally with compensated (Kahan) summation so that long
runs with unit-modulus phases keep their digits.

Elements are duck-typed: anything supporting ``+``, ``-``, scalar ``*``,
``@`` (algebra product), ``adjoint()`` and ``norm()`` works, in particular
:class:`~ergodica.algebra.UnitizedElement` and
:class:`~ergodica.modes.ModeElement`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import UnitizedElement

UNIT_TOL = 1e-12


class HorizonError(ValueError):
    """Iteration count exceeds the truncation's safe horizon."""


class PreconditionError(ValueError):
    """An eigen-element fails its isometry/co-isometry/inverse/eigen bound."""


def _norm(x):
    return x.norm()


def _upper_norm(x):
    f = getattr(x, "norm_upper", None)
    return f() if f is not None else x.norm()


def _lower_norm(x):
    f = getattr(x, "norm_lower", None)
    return f() if f is not None else x.norm()


# ---------------------------------------------------------------------------
# coordinate spaces


class UnitizedSpace:
    """Coordinates of unitized elements: row-major compact entries, then the scalar."""

    def __init__(self, basis):
        self.basis = basis
        self.window_dim = basis.dim
        self.dim = basis.dim ** 2 + 1

    def element(self, k):
        d = self.window_dim
        if k == d * d:
            return UnitizedElement.unit(self.basis)
        a = np.zeros((d, d), dtype=np.complex128)
        a.flat[k] = 1.0
        return UnitizedElement._new(a, 0.0, self.basis)

    def vector(self, x):
        return np.concatenate([np.asarray(x.dense()).ravel(), [x.scalar]])

    def from_vector(self, v):
        d = self.window_dim
        v = np.asarray(v, dtype=np.complex128)
        return UnitizedElement._new(v[: d * d].reshape(d, d).copy(), v[d * d], self.basis)


# ---------------------------------------------------------------------------
# endomorphisms


class Endomorphism:
    """Unital *-endomorphism ``Phi`` acting on algebra elements.

    Parameters
    ----------
    apply : callable
        Linear map on elements. Must fix the unit and commute with adjoints.
    label : str
    mult_defect_bound : float
        Bound on ``||Phi(xy) - Phi(x)Phi(y)||`` for inputs localized inside
        the safe window (0 for exactly multiplicative maps).
    safe_horizon : int or None
        Largest iteration count for which orbits of the declared probes stay
        off the truncation boundary. ``None`` means unbounded.
    space : coordinate space or None
        Needed to build the superoperator.
    """

    def __init__(self, apply, label="", mult_defect_bound=0.0, safe_horizon=None, space=None):
        self._apply = apply
        self.label = label
        self.mult_defect_bound = float(mult_defect_bound)
        self.safe_horizon = safe_horizon
        self.space = space

    def __call__(self, x):
        return self._apply(x)

    def apply(self, x):
        return self._apply(x)

    def power(self, x, k):
        for _ in range(k):
            x = self(x)
        return x

    def multiplicativity_defect(self, x, y):
        return _norm(self(x @ y) - self(x) @ self(y))

    def check_contracts(self, samples, one):
        """Largest unitality, *-preservation and linearity defects over ``samples``."""
        unit = _norm(self(one) - one)
        star = max((_norm(self(x.adjoint()) - self(x).adjoint()) for x in samples), default=0.0)
        lin = 0.0
        for x, y in zip(samples, samples[1:]):
            c = 0.3 - 0.7j
            lin = max(lin, _norm(self(x + c * y) - self(x) - c * self(y)))
        return {"unit": unit, "star": star, "linearity": lin}

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r})"


def identity_endomorphism(space=None, label="identity"):
    return Endomorphism(lambda x: x, label=label, space=space)


def _index_map(V):
    """Return sigma with V e_i = e_{sigma(i)} (or -1), if V is a 0/1 partial injection."""
    V = sp.csc_array(V)
    d = V.shape[0]
    V.eliminate_zeros()
    counts = np.diff(V.indptr)
    if counts.max(initial=0) > 1 or not np.all(V.data == 1):
        return None
    sigma = np.full(d, -1, dtype=np.int64)
    cols = np.flatnonzero(counts)
    sigma[cols] = V.indices[V.indptr[cols]]
    tgt = sigma[sigma >= 0]
    if len(np.unique(tgt)) != len(tgt):
        return None
    return sigma


class ConjugationEndomorphism(Endomorphism):
    """``Phi(a, b) = (V a V*, b)`` for a contraction ``V`` on the window.

    When ``V`` is a partial permutation (a truncated shift) it is applied as
    an index map, which is exact and cheap for dense and sparse inputs.
    """

    def __init__(self, V, basis, label="", safe_horizon=None, mult_defect_bound=0.0):
        self.V = V
        self.basis = basis
        self.sigma = _index_map(V)
        super().__init__(self._conj, label=label, mult_defect_bound=mult_defect_bound,
                         safe_horizon=safe_horizon, space=UnitizedSpace(basis))
        if self.sigma is not None:
            self._src = np.flatnonzero(self.sigma >= 0)
            self._tgt = self.sigma[self._src]

    def implementer(self):
        V = self.V
        return V.toarray() if sp.issparse(V) else np.asarray(V)

    def apply_compact(self, a):
        if self.sigma is None:
            V = self.V
            if a.ndim == 3:
                Vd = self.implementer()
                return Vd @ a @ Vd.conj().T
            return V @ a @ V.conj().T
        if sp.issparse(a):
            coo = sp.coo_array(a)
            r, c = self.sigma[coo.row], self.sigma[coo.col]
            keep = (r >= 0) & (c >= 0)
            return sp.csr_array((coo.data[keep], (r[keep], c[keep])), shape=a.shape)
        out = np.zeros_like(a)
        src, tgt = self._src, self._tgt
        out[..., tgt[:, None], tgt[None, :]] = a[..., src[:, None], src[None, :]]
        return out

    def _conj(self, x):
        return UnitizedElement._new(self.apply_compact(x.compact), x.scalar, x.basis)


# ---------------------------------------------------------------------------
# Cesaro averages


def _check_unit(lam):
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > UNIT_TOL:
        raise ValueError(f"|lambda| = {abs(lam):.15f} deviates from 1 beyond {UNIT_TOL}")
    return lam


def _check_horizon(endo, n):
    h = getattr(endo, "safe_horizon", None)
    if h is not None and n > h:
        raise HorizonError(f"n = {n} exceeds the safe horizon {h} of {endo.label or endo}")


class CesaroAccumulator:
    """Running sum ``sum_{k<n} lam^{-k} Phi^k(a)`` with Kahan compensation.

    Single-owner mutable state: ``step()`` advances ``n`` by one using one
    application of ``Phi``.
    """

    def __init__(self, endo, a, lam, check_unit=True):
        self.endo = endo
        self.lam = _check_unit(lam) if check_unit else complex(lam)
        if self.lam == 0:
            raise ValueError("lambda must be nonzero")
        self._r = abs(self.lam)
        self._phi = np.angle(self.lam)
        self.n = 0
        self.current_iterate = a
        self.running_sum = a * 0.0
        self._comp = a * 0.0

    def phase(self, k):
        """``lam^{-k}`` evaluated in polar form (no drift from repeated products)."""
        return self._r ** (-k) * np.exp(-1j * k * self._phi)

    def step(self):
        term = self.phase(self.n) * self.current_iterate
        y = term - self._comp
        t = self.running_sum + y
        self._comp = (t - self.running_sum) - y
        self.running_sum = t
        self.current_iterate = self.endo(self.current_iterate)
        self.n += 1

    def advance(self, n):
        while self.n < n:
            self.step()
        return self

    def mean(self):
        if self.n == 0:
            raise ValueError("no terms accumulated")
        return self.running_sum * (1.0 / self.n)


def cesaro(endo, a, lam, n):
    """Cesaro average ``(1/n) sum_{k=0}^{n-1} lam^{-k} Phi^k(a)`` for ``|lam| = 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = _check_unit(lam)
    _check_horizon(endo, n)
    return CesaroAccumulator(endo, a, lam).advance(n).mean()


@dataclass
class ConvergenceDiagnostics:
    """Doubling residuals ``||M(n) - M(2n)||`` and tail norms ``||lam^{-n} Phi^n(a)||/n``."""

    lam: complex
    residual_trace: list = field(default_factory=list)
    tail: list = field(default_factory=list)
    verdict: str = "undecided"

    @property
    def tail_norm(self):
        return self.tail[-1][1] if self.tail else float("nan")

    def to_json(self):
        return json.dumps({
            "lambda": [self.lam.real, self.lam.imag],
            "trace": [[int(n), float(r)] for n, r in self.residual_trace],
            "tail": [[int(n), float(v)] for n, v in self.tail],
            "verdict": self.verdict,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(complex(*d["lambda"]), [tuple(t) for t in d["trace"]],
                   [tuple(t) for t in d["tail"]], d["verdict"])


def _tail_schedule(n_max):
    if n_max <= 256:
        return set(range(1, n_max + 1))
    pts = np.unique(np.round(np.geomspace(1, n_max, 128)).astype(int))
    return set(pts.tolist()) | set(range(max(1, 2 * n_max // 3), n_max + 1, max(1, n_max // 96))) | {n_max}


def _run(endo, a, lam, n_max, tol, check_unit=True):
    acc = CesaroAccumulator(endo, a, lam, check_unit=check_unit)
    diag = ConvergenceDiagnostics(acc.lam)
    schedule = _tail_schedule(n_max)
    means = {}
    while acc.n < n_max:
        acc.step()
        n = acc.n
        if n & (n - 1) == 0 or n == n_max:
            means[n] = acc.mean()
        if n in schedule:
            diag.tail.append((n, abs(acc.phase(n)) * _norm(acc.current_iterate) / n))
    p = 1
    while 2 * p <= n_max:
        diag.residual_trace.append((p, _norm(means[p] - means[2 * p])))
        p *= 2
    diag.verdict = _verdict(diag, tol)
    return acc.mean(), diag


def _verdict(diag, tol):
    res = [r for _, r in diag.residual_trace]
    if len(res) >= 3 and all(r < tol for r in res[-3:]):
        return "converged"
    if diag.tail:
        n_last = diag.tail[-1][0]
        third = [v for n, v in diag.tail if n >= 2 * n_last / 3]
        if len(third) >= 2 and third[-1] >= third[0] > 0:
            return "diverged"
    return "undecided"


def necessary_condition_check(endo, a, lam, n_max, tol=1e-6):
    """Track the necessary condition ``lam^{-n} Phi^n(a) / n -> 0`` up to ``n_max``.

    ``lam`` may be any nonzero complex number here. Verdict ``'converged'``
    when the last three doubling residuals are below ``tol``; ``'diverged'``
    when the tail norm does not decrease over the final third of the range.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    _check_horizon(endo, n_max)
    return _run(endo, a, lam, n_max, tol, check_unit=False)[1]


def ergodic_projection_E1(endo, a, n, tol=1e-6):
    """Cesaro average at ``lam = 1`` together with its convergence diagnostics."""
    if n < 2:
        raise ValueError("n must be >= 2")
    _check_horizon(endo, n)
    return _run(endo, a, 1.0, n, tol)


# ---------------------------------------------------------------------------
# eigenspace projections


def _expectation(endo, n, expectation):
    if expectation is not None:
        return expectation
    if n is None:
        raise ValueError("give either n (Cesaro-based E_1) or an exact expectation")
    return lambda y: cesaro(endo, y, 1.0, n)


def _check_eigen(endo, u, lam, tol):
    d = _norm(endo(u) - lam * u)
    if d > tol:
        raise PreconditionError(f"||Phi(u) - lam u|| = {d:.3e} exceeds {tol:.1e}")


def E_lambda_iso(endo, x, u, lam, n=None, expectation=None, tol=1e-9):
    """``E_1(x u*) u`` for an isometry ``u`` in the ``lam``-eigenspace.

    ``E_1`` is the Cesaro average at ``lam = 1`` over ``n`` steps, or the
    supplied exact ``expectation``.
    """
    one = u.adjoint() @ u
    d = _norm(one - _unit_like(u))
    if d > tol:
        raise PreconditionError(f"u is not an isometry: ||u*u - 1|| = {d:.3e}")
    _check_eigen(endo, u, lam, tol)
    E1 = _expectation(endo, n, expectation)
    return E1(x @ u.adjoint()) @ u


def E_lambda_coiso(endo, x, u, lam, n=None, expectation=None, tol=1e-9):
    """``u E_1(u* x)`` for a co-isometry ``u`` in the ``lam``-eigenspace."""
    d = _norm(u @ u.adjoint() - _unit_like(u))
    if d > tol:
        raise PreconditionError(f"u is not a co-isometry: ||uu* - 1|| = {d:.3e}")
    _check_eigen(endo, u, lam, tol)
    E1 = _expectation(endo, n, expectation)
    return u @ E1(u.adjoint() @ x)


def E_lambda_invertible(endo, x, a, a_inv, lam, n=None, expectation=None, tol=1e-9):
    """``a E_1(a^{-1} x)`` for an invertible ``a`` in the ``lam``-eigenspace.

    Returns ``(value, distance)`` where ``distance`` is the norm gap to the
    right-handed form ``E_1(x a^{-1}) a``.
    """
    one = _unit_like(a)
    d = max(_norm(a @ a_inv - one), _norm(a_inv @ a - one))
    if d > tol:
        raise PreconditionError(f"a_inv is not an inverse of a: defect {d:.3e}")
    _check_eigen(endo, a, lam, tol * max(1.0, _norm(a)))
    E1 = _expectation(endo, n, expectation)
    left = a @ E1(a_inv @ x)
    right = E1(x @ a_inv) @ a
    return left, _norm(left - right)


def _unit_like(x):
    unit = getattr(x, "unit_like", None)
    if unit is not None:
        return unit()
    return UnitizedElement.unit(x.basis) if x.basis is not None else UnitizedElement._new(
        np.zeros_like(x.compact), 1.0, None)


@dataclass
class ProjectionReport:
    idempotence: float
    contractivity_excess: float
    eigenspace_range: float
    u_independence: float
    tol: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def projection_properties_check(E, endo, lam, samples, alt=None, tol=1e-8):
    """Check that ``E`` behaves as a norm-one projection onto the ``lam``-eigenspace.

    Measures idempotence ``||E(E(x)) - E(x)||``, contractivity excess
    ``||E(x)|| - ||x||``, range ``||Phi(E(x)) - lam E(x)||`` and, when an
    alternative realization ``alt`` (built from another eigen-element) is
    given, ``||E(x) - alt(x)||``. Violations are listed, not raised.
    """
    idem = contr = rng = indep = 0.0
    violations = []
    for k, x in enumerate(samples):
        y = E(x)
        idem = max(idem, _norm(E(y) - y))
        contr = max(contr, _lower_norm(y) - _upper_norm(x))
        rng = max(rng, _norm(endo(y) - lam * y))
        if alt is not None:
            indep = max(indep, _norm(y - alt(x)))
    for name, val in [("idempotence", idem), ("contractivity", contr),
                      ("eigenspace_range", rng), ("u_independence", indep)]:
        if val > tol:
            violations.append(f"{name}: {val:.3e} > {tol:.1e}")
    return ProjectionReport(idem, contr, rng, indep, tol, violations)
