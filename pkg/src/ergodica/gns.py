"""Finite GNS construction, the covariant contraction and spectral point masses.

Given a state ``phi`` and generators ``b_1..b_N`` spanning a *-closed,
Phi-stable subspace containing 1, the GNS space is the quotient of that span
by the null vectors of the Gram matrix ``G_ij = phi(b_i* b_j)``. With
``G = Q diag(w) Q*`` and the eigenvalues above a relative cut kept,
``C = Q_+ diag(w_+)^{-1/2}`` maps coordinates to an orthonormal basis and

* ``pi(x) = C* [phi(b_i* x b_j)] C``
* ``V = C* [phi(b_i* Phi(b_j))] C``
* ``[y] = C* [phi(b_i* y)]_i``.

Inner products are linear in the second argument. Eigenvalues of ``V`` are
written ``lam = exp(-i theta)`` and the Fourier estimate of the point mass
at ``theta`` is ``Re (1/N) sum_n exp(i n theta) <xi, V^n xi>``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .algebra import UnitizedElement
from .modes import ModeElement
from .numerics import null_space

KERNEL_REL_CUT = 1e-10
PSD_TOL = 1e-10


class StatePositivityError(ValueError):
    """The Gram matrix has a significantly negative eigenvalue."""


class StabilityError(ValueError):
    """The generator span is not stable under the endomorphism."""


# ---------------------------------------------------------------------------
# states


class StateFunctional:
    """A state given by a linear functional on algebra elements.

    Subclasses may override :meth:`sesq` with a vectorized formula; the
    default evaluates ``phi(A_i* B_j)`` one product at a time.
    """

    def __init__(self, eval, label=""):
        self._eval = eval
        self.label = label

    def __call__(self, x):
        return complex(self._eval(x))

    def sesq(self, A, B):
        """Matrix ``S_ij = phi(A_i* B_j)``."""
        S = np.empty((len(A), len(B)), dtype=np.complex128)
        adj = [a.adjoint() for a in A]
        for i, a in enumerate(adj):
            for j, b in enumerate(B):
                S[i, j] = self(a @ b)
        return S

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r})"


def _features(x, R):
    """Per-element data for ``phi(a, b) = tr(R* a R) + c b``."""
    a = x.compact
    Y = a @ R
    if sp.issparse(Y):
        Y = Y.toarray()
    Y = np.asarray(Y)
    return Y.ravel(), np.vdot(R, Y), x.scalar


class DensityState(StateFunctional):
    """``phi(a + b 1) = tr(R* a R) + c b`` with ``R`` of shape ``(d, r)``.

    ``omega_Omega`` is ``R = e_Omega, c = 1``; the state at infinity is
    ``R = 0, c = 1``. Positivity holds whenever ``c >= tr(R* R)``.
    """

    def __init__(self, R, c=1.0, label=""):
        self.R = np.asarray(R, dtype=np.complex128)
        if self.R.ndim == 1:
            self.R = self.R[:, None]
        self.c = complex(c)
        super().__init__(self._density_eval, label)

    def _density_eval(self, x):
        _, t, s = _features(x, self.R)
        return t + self.c * s

    def feature_arrays(self, elems):
        d, r = self.R.shape
        Y = np.zeros((len(elems), d * r), np.complex128)
        t = np.zeros(len(elems), np.complex128)
        s = np.zeros(len(elems), np.complex128)
        for k, x in enumerate(elems):
            Y[k], t[k], s[k] = _features(x, self.R)
        return Y, t, s

    def sesq(self, A, B):
        return _density_sesq(self.feature_arrays(A), self.feature_arrays(B), self.c)


def _density_sesq(FA, FB, c):
    YA, tA, sA = FA
    YB, tB, sB = FB
    return (YA.conj() @ YB.T + np.outer(sA.conj(), tB) + np.outer(tA.conj(), sB)
            + c * np.outer(sA.conj(), sB))


def vacuum_state(basis, label="omega_Omega"):
    R = np.zeros((basis.dim, 1), np.complex128)
    R[0, 0] = 1.0
    return DensityState(R, 1.0, label)


def infinity_state(basis, label="omega_inf"):
    return DensityState(np.zeros((basis.dim, 0), np.complex128), 1.0, label)


def mixture(states, weights, label=""):
    """Convex combination of states.

    Density states combine into a density state by stacking ``sqrt(w) R``.
    """
    weights = [float(w) for w in weights]
    if any(w < 0 for w in weights) or abs(sum(weights) - 1) > 1e-12:
        raise ValueError("mixture weights must be non-negative and sum to 1")
    if all(isinstance(s, DensityState) for s in states):
        R = np.hstack([np.sqrt(w) * s.R for s, w in zip(states, weights)])
        return DensityState(R, sum(w * s.c for s, w in zip(states, weights)), label)
    if all(isinstance(s, HaarProductState) for s in states):
        return HaarProductState(mixture([s.inner for s in states], weights), label)
    return StateFunctional(lambda x: sum(w * s(x) for s, w in zip(states, weights)), label)


def boolean_family_state(basis, t, label=None):
    """``(1 - t) omega_Omega + t omega_inf``."""
    R = np.zeros((basis.dim, 1), np.complex128)
    R[0, 0] = np.sqrt(1.0 - t)
    return DensityState(R, 1.0, label or f"phi_{t:g}")


class HaarProductState(StateFunctional):
    """``psi(f) = phi(f_0)``: Haar measure on the circle tensored with ``phi``."""

    def __init__(self, inner, label=""):
        self.inner = inner
        super().__init__(lambda f: inner(f.coefficient(0)), label)

    def sesq(self, A, B):
        if not isinstance(self.inner, DensityState):
            return super().sesq(A, B)
        # (A_i* B_j)_0 = sum_m (A_i)_m* (B_j)_m
        modes = sorted(set().union(*(f.modes for f in A)) & set().union(*(f.modes for f in B)))
        S = np.zeros((len(A), len(B)), np.complex128)
        for m in modes:
            S += _density_sesq(self.inner.feature_arrays([f.coefficient(m) for f in A]),
                               self.inner.feature_arrays([f.coefficient(m) for f in B]),
                               self.inner.c)
        return S


def invariance_residual(state, endo, probes):
    """``max |phi(Phi(x)) - phi(x)|`` over ``probes``."""
    return max((abs(state(endo(x)) - state(x)) for x in probes), default=0.0)


def check_state(state, probes, one, tol=1e-10):
    """Return the unit, positivity and hermiticity defects of ``state`` on ``probes``."""
    unit = abs(state(one) - 1.0)
    pos = max((max(0.0, -state(x.adjoint() @ x).real) for x in probes), default=0.0)
    herm = max((abs(state(x.adjoint()) - np.conj(state(x))) for x in probes), default=0.0)
    return {"unit": unit, "positivity": pos, "hermiticity": herm,
            "ok": unit <= 1e-12 and pos <= tol and herm <= 1e-12}


# ---------------------------------------------------------------------------
# GNS


@dataclass(frozen=True)
class GnsData:
    """Covariant GNS data in an orthonormal coordinate basis.

    Attributes
    ----------
    dim : int
    covariant_op : ndarray
        Matrix of ``V`` with ``V pi(x) xi = pi(Phi(x)) xi``.
    cyclic_vector : ndarray
        ``xi``, the class of the unit.
    kernel_cut : float
        Gram eigenvalues at or below this were quotiented out.
    """

    dim: int
    covariant_op: np.ndarray
    cyclic_vector: np.ndarray
    kernel_cut: float
    coords: np.ndarray
    generators: tuple
    state: StateFunctional
    endo: object
    gram_eigenvalues: np.ndarray
    stability_defect: float

    def vector_of(self, y):
        """Class ``[y]`` of an element (projected onto the generator span)."""
        return self.coords.conj().T @ self.state.sesq(self.generators, [y])[:, 0]

    def rep(self, x):
        """Matrix of ``pi(x)`` compressed to the generator span."""
        T = self.state.sesq(self.generators, [x @ b for b in self.generators])
        return self.coords.conj().T @ T @ self.coords

    def summary(self):
        ev = np.linalg.eigvals(self.covariant_op) if self.dim else np.zeros(0)
        return {
            "dim": int(self.dim),
            "kernel_cut": float(self.kernel_cut),
            "isometry_defect": isometry_defect(self),
            "stability_defect": float(self.stability_defect),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in ev],
            "state": self.state.label,
        }

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True)


def gns_build(generators, state, endo, kernel_tol=KERNEL_REL_CUT, stability_tol=1e-8):
    """Build the covariant GNS data of ``state`` on the span of ``generators``.

    Parameters
    ----------
    generators : sequence of elements
        Must span a *-closed, ``endo``-stable subspace containing 1.
    state : StateFunctional
    endo : Endomorphism
    kernel_tol : float
        Relative cut: Gram eigenvalues ``<= kernel_tol * max`` are dropped.

    Raises
    ------
    StatePositivityError
        Gram matrix has an eigenvalue below ``-1e-10 * max(1, ||G||)``.
    StabilityError
        ``||[Phi(b)]||^2`` differs from ``phi(Phi(b)* Phi(b))`` for some
        generator, i.e. ``Phi(b)`` leaves the span.
    """
    gens = tuple(generators)
    if not gens:
        raise ValueError("need at least one generator")
    G = state.sesq(gens, gens)
    herm = np.abs(G - G.conj().T).max()
    scale = max(1.0, float(np.abs(G).max()))
    if herm > PSD_TOL * scale:
        raise StatePositivityError(f"Gram matrix not Hermitian (defect {herm:.3e})")
    w, Q = np.linalg.eigh((G + G.conj().T) / 2)
    if w.min() < -PSD_TOL * max(1.0, w.max()):
        raise StatePositivityError(f"state not positive on span: Gram eigenvalue {w.min():.3e}")
    cut = kernel_tol * max(w.max(), 0.0)
    keep = w > cut
    C = Q[:, keep] / np.sqrt(w[keep])[None, :]
    images = [endo(b) for b in gens]
    TPhi = state.sesq(gens, images)
    V = C.conj().T @ TPhi @ C
    norms2 = state.sesq(images, images).diagonal().real
    # ||[Phi(b_j)]||^2 versus the squared norm of its projection onto the span
    proj2 = np.linalg.norm(C.conj().T @ TPhi, axis=0) ** 2
    stab = float(np.abs(norms2 - proj2).max())
    if stab > stability_tol * max(1.0, norms2.max()):
        raise StabilityError(f"generator span is not stable under {endo!r}: defect {stab:.3e}")
    one = _unit_of(gens[0])
    xi = C.conj().T @ state.sesq(gens, [one])[:, 0]
    if abs(np.linalg.norm(xi) - 1.0) > 1e-10:
        raise ValueError(f"unit is not in the generator span (||xi|| = {np.linalg.norm(xi):.12f})")
    return GnsData(int(C.shape[1]), V, xi, float(cut), C, gens, state, endo, w, stab)


def _unit_of(x):
    if isinstance(x, ModeElement):
        return ModeElement.unit(x.basis)
    return UnitizedElement.unit(x.basis)


def isometry_defect(g, probes=None):
    """``||V* V - I||``, optionally restricted to the span of ``[p]`` for ``p`` in probes."""
    if g.dim == 0:
        return 0.0
    D = g.covariant_op.conj().T @ g.covariant_op - np.eye(g.dim)
    if probes is not None:
        P = np.column_stack([g.vector_of(p) for p in probes])
        Q, s, _ = np.linalg.svd(P, full_matrices=False)
        Q = Q[:, s > 1e-12 * max(1.0, s.max(initial=0.0))]
        D = Q.conj().T @ D @ Q
    return float(np.linalg.norm(D, 2)) if D.size else 0.0


# ---------------------------------------------------------------------------
# point masses


@dataclass(frozen=True)
class SpectralMassEstimate:
    theta: float
    mass: float
    N_used: int
    method: str
    raw: float
    defective: bool = False


def _angle(theta):
    return float(np.mod(theta, 2 * np.pi))


def point_mass_direct(g, xi, theta, tol=1e-8):
    """Squared norm of the projection of ``xi`` on the ``exp(-i theta)``-eigenspace of ``V``.

    The eigenspace is the numerical kernel of ``V - lam I`` (singular values
    ``<= tol``). ``defective`` is set when ``V`` has eigenvalues within
    ``sqrt(tol)`` of ``lam`` but no kernel vector at ``tol``.
    """
    xi = np.asarray(xi, np.complex128)
    lam = np.exp(-1j * theta)
    V = g.covariant_op if isinstance(g, GnsData) else np.asarray(g, np.complex128)
    Q, _, _ = null_space(V - lam * np.eye(V.shape[0]), tol)
    raw = float(np.linalg.norm(Q.conj().T @ xi) ** 2) if Q.shape[1] else 0.0
    defective = False
    if Q.shape[1] == 0:
        near = np.abs(np.linalg.eigvals(V) - lam) <= np.sqrt(tol)
        defective = bool(near.any())
    mass = min(max(raw, 0.0), float(np.vdot(xi, xi).real))
    return SpectralMassEstimate(_angle(theta), mass, 0, "direct", raw, defective)


def fourier_coefficients(V, xi, N):
    """``<xi, V^n xi>`` for ``n = 0..N-1``."""
    out = np.empty(N, np.complex128)
    v = np.asarray(xi, np.complex128).copy()
    for n in range(N):
        out[n] = np.vdot(xi, v)
        v = V @ v
    return out


def point_mass_wiener(g, xi, theta, N):
    """Fourier (Wiener) estimate ``Re (1/N) sum_{n<N} exp(i n theta) <xi, V^n xi>``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    V = g.covariant_op if isinstance(g, GnsData) else np.asarray(g, np.complex128)
    c = fourier_coefficients(V, xi, N)
    raw = float(np.mean(np.exp(1j * theta * np.arange(N)) * c).real)
    mass = min(max(raw, 0.0), float(np.vdot(xi, xi).real))
    return SpectralMassEstimate(_angle(theta), mass, int(N), "wiener", raw)


def eigvec_from_algebra_isometry(g, u, lam, tol=1e-9):
    """``pi(u) xi`` for an isometric eigen-element ``u`` (``Phi(u) = lam u``).

    Returns ``(vector, residual)`` with ``residual = ||V v - lam v||``.
    """
    one = _unit_of(u)
    d_iso = (u.adjoint() @ u - one).norm()
    if d_iso > tol:
        raise ValueError(f"u is not an isometry: ||u*u - 1|| = {d_iso:.3e}")
    d_eig = (g.endo(u) - lam * u).norm()
    if d_eig > tol:
        raise ValueError(f"u is not a lam-eigen-element: ||Phi(u) - lam u|| = {d_eig:.3e}")
    v = g.vector_of(u)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"||pi(u) xi|| = {np.linalg.norm(v):.12f} is not 1")
    return v, float(np.linalg.norm(g.covariant_op @ v - lam * v))


# ---------------------------------------------------------------------------
# lower-bound check


@dataclass
class LemmaReport:
    lhs: float
    lhs_by_state: dict
    rhs_trace: list
    rhs_max: float
    limsup_estimate: float
    tol: float

    @property
    def passed(self):
        return self.lhs >= self.limsup_estimate - self.tol


def _limsup_fit(ns, r):
    """Fit ``r_n ~ L + C / n`` over the final half and return ``max(L, 0)``."""
    ns, r = np.asarray(ns, float), np.asarray(r, float)
    half = ns >= ns[-1] / 2
    if half.sum() < 2:
        return float(r[-1])
    A = np.column_stack([np.ones(half.sum()), 1.0 / ns[half]])
    (L, _), *_ = np.linalg.lstsq(A, r[half], rcond=None)
    return float(max(L, 0.0))


def lemma_mle_inequality_check(system, a, lam, state_sequence, n_max, tol=1e-6):
    """Compare the point-mass side with averaged state values.

    LHS is ``max_omega mu_{[a]}({theta})^{1/2}`` over the system's invariant
    states, with ``lam = exp(-i theta)``. The right side is the trace
    ``r_n = (1/n) |sum_{k<n} omega_n(Phi^k(a)) lam^{-k}|`` where ``omega_n``
    runs through ``state_sequence`` (cycled). Its limsup is estimated by a
    least-squares fit ``r_n ~ L + C/n`` on the final half of the range, and
    the check passes when ``LHS >= L - tol``.
    """
    theta = -np.angle(lam)
    per_state = {}
    for k, omega in enumerate(system.invariant_states):
        g = gns_build(system.gns_generators, omega, system.endo)
        m = point_mass_direct(g, g.vector_of(a), theta).mass
        per_state[omega.label or str(k)] = float(np.sqrt(m))
    lhs = max(per_state.values())
    states = list(state_sequence)
    iterates = [a]
    for _ in range(n_max - 1):
        iterates.append(system.endo(iterates[-1]))
    phase = np.exp(-1j * np.angle(lam) * np.arange(n_max))
    partial = [np.cumsum([omega(x) for x in iterates] * phase) for omega in states]
    trace = [abs(partial[(n - 1) % len(states)][n - 1]) / n for n in range(1, n_max + 1)]
    ns = np.arange(1, n_max + 1)
    return LemmaReport(lhs, per_state, trace, float(max(trace)), _limsup_fit(ns, trace), tol)
