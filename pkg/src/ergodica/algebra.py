"""Truncated Fock spaces and the unitized pair algebra ``a + b*1``.

Basis labels are integer tuples: the vacuum is ``()``, a boolean one-particle
vector is ``(j,)`` and a monotone vector is a strictly increasing tuple
``(j1, j2, ...)`` of sites in the window ``[-L, L]``.

Elements of the unitized algebra are carried as a pair ``(compact, scalar)``.
Inside a finite window every matrix is "compact", so the scalar must be kept
structurally: it is the value of the operator at infinity, which is what the
state at infinity reads off.

Monotone creation convention: ``m+_i e_J = e_{(i,) + J}`` when ``i < min(J)``
and ``len(J) < p``, else 0 (``min(()) = +inf``). It is isolated in
:func:`monotone_creator` so that the non-strict variant could be swapped in.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .numerics import as_matrix, as_scalar, op_norm

DENSE_LIMIT = 1024
MAX_BASIS_STATES = 200_000


# ---------------------------------------------------------------------------
# bases


class FockBasis:
    """Ordered list of basis labels for a truncated Fock space.

    Parameters
    ----------
    kind : {'monotone', 'boolean', 'block'}
        ``'block'`` is the vacuum-only space used by the exactly
        multiplicative mode-space variant.
    L : int
        Window half-width, sites are ``-L..L``.
    depth_cap : int
        Maximal tuple length (1 for boolean).
    states : sequence of tuple
        Labels, index 0 must be the vacuum ``()``.
    """

    def __init__(self, kind, L, depth_cap, states):
        states = tuple(tuple(int(j) for j in s) for s in states)
        if not states or states[0] != ():
            raise ValueError("index 0 of a Fock basis must be the vacuum ()")
        index = {s: k for k, s in enumerate(states)}
        if len(index) != len(states):
            raise ValueError("basis labels are not unique")
        for s in states:
            if any(b <= a for a, b in zip(s, s[1:])):
                raise ValueError(f"label {s} is not strictly increasing")
            if any(abs(j) > L for j in s) or len(s) > depth_cap:
                raise ValueError(f"label {s} lies outside window/depth")
        self.kind = kind
        self.L = int(L)
        self.depth_cap = int(depth_cap)
        self.states = states
        self._index = index

    @property
    def dim(self):
        return len(self.states)

    @property
    def key(self):
        return (self.kind, self.L, self.depth_cap, self.dim)

    def index(self, label):
        try:
            return self._index[tuple(label)]
        except KeyError:
            raise KeyError(f"{label} is not a basis label") from None

    def __contains__(self, label):
        return tuple(label) in self._index

    def sites(self):
        return range(-self.L, self.L + 1)

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, FockBasis) and self.key == other.key and self.states == other.states

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"FockBasis(kind={self.kind!r}, L={self.L}, depth_cap={self.depth_cap}, dim={self.dim})"

    def to_json(self):
        return json.dumps({"kind": self.kind, "L": self.L, "depth_cap": self.depth_cap,
                           "states": [list(s) for s in self.states]})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else text
        if d["kind"] == "trivial":
            return trivial_basis()
        return cls(d["kind"], d["L"], d["depth_cap"], [tuple(s) for s in d["states"]])


def monotone_state_count(L, p):
    return sum(comb(2 * L + 1, k) for k in range(p + 1))


def monotone_basis(L, p, max_states=MAX_BASIS_STATES):
    """Strictly increasing site tuples of length ``<= p`` in ``[-L, L]``.

    Ordered by length, then lexicographically.
    """
    if L < 1 or p < 1:
        raise ValueError("monotone_basis needs L >= 1 and p >= 1")
    count = monotone_state_count(L, p)
    if count > max_states:
        raise ValueError(f"monotone basis would have {count} states (cap {max_states})")
    sites = range(-L, L + 1)
    states = [()]
    for k in range(1, p + 1):
        states.extend(itertools.combinations(sites, k))
    return FockBasis("monotone", L, p, states)


def boolean_basis(L):
    """Vacuum plus the one-particle vectors ``e_j``, ``|j| <= L``."""
    if L < 1:
        raise ValueError("boolean_basis needs L >= 1")
    return FockBasis("boolean", L, 1, [()] + [(j,) for j in range(-L, L + 1)])


def vacuum_block_basis():
    """One-dimensional space spanned by the vacuum."""
    return FockBasis("block", 0, 0, [()])


def trivial_basis():
    """Zero-dimensional window: elements are pure scalars (used for C(T))."""
    b = FockBasis.__new__(FockBasis)
    b.kind, b.L, b.depth_cap, b.states, b._index = "trivial", 0, 0, (), {}
    return b


@dataclass(frozen=True)
class TruncationReport:
    leaked_mass: float
    flag: bool


def _finish(rows, cols, vals, dim, sparse):
    m = sp.csr_array((np.asarray(vals, dtype=np.complex128), (rows, cols)), shape=(dim, dim))
    if sparse is None:
        sparse = dim > DENSE_LIMIT
    return m if sparse else m.toarray()


def monotone_creator(basis, i, sparse=None, report=False):
    """Matrix of the monotone creator ``m+_i`` on a truncated monotone basis.

    Returns a dense array, or a CSR array when ``sparse`` is true (default:
    sparse above ``DENSE_LIMIT`` states). With ``report=True`` also returns a
    :class:`TruncationReport` measuring the creations dropped by the depth cap.
    """
    if basis.kind != "monotone":
        raise ValueError("monotone_creator needs a monotone basis")
    if not -basis.L <= i <= basis.L:
        raise ValueError(f"site {i} outside window [-{basis.L}, {basis.L}]")
    rows, cols, leaked = [], [], 0
    for c, J in enumerate(basis.states):
        if J and i >= J[0]:
            continue
        if len(J) >= basis.depth_cap:
            leaked += 1
            continue
        rows.append(basis.index((i,) + J))
        cols.append(c)
    m = _finish(rows, cols, np.ones(len(rows)), basis.dim, sparse)
    if report:
        return m, TruncationReport(float(np.sqrt(leaked)), leaked > 0)
    return m


def boolean_creator(basis, i, sparse=None):
    """``b+_i = |e_i><Omega|`` on the boolean basis."""
    if basis.kind != "boolean":
        raise ValueError("boolean_creator needs a boolean basis")
    if not -basis.L <= i <= basis.L:
        raise ValueError(f"site {i} outside window [-{basis.L}, {basis.L}]")
    return _finish([basis.index((i,))], [0], [1.0], basis.dim, sparse)


def ket_bra(basis, row_label, col_label, sparse=None):
    """Matrix unit ``|e_row><e_col|``."""
    return _finish([basis.index(row_label)], [basis.index(col_label)], [1.0], basis.dim, sparse)


# ---------------------------------------------------------------------------
# unitized elements


def _adj(a):
    return a.conj().T


def _is_sparse(a):
    return sp.issparse(a)


class UnitizedElement:
    """Element ``compact + scalar * 1`` of a unitized truncated algebra.

    ``compact`` is a square complex matrix (dense ndarray or scipy sparse
    array) over ``basis``; ``scalar`` is the coefficient of the identity.

    Arithmetic: ``x + y``, ``x - y``, ``c * x`` (scalar), ``x @ y`` (algebra
    product), ``x.adjoint()``, ``x.norm()``.
    """

    __slots__ = ("compact", "scalar", "basis")

    def __init__(self, compact, scalar=0.0, basis=None):
        if not _is_sparse(compact):
            compact = as_matrix(compact)
        else:
            compact = sp.csr_array(compact, dtype=np.complex128)
        if compact.shape[0] != compact.shape[1]:
            raise ValueError(f"compact part must be square, got {compact.shape}")
        if basis is not None and compact.shape[0] != basis.dim:
            raise ValueError(f"compact part is {compact.shape[0]}-dim, basis has {basis.dim} states")
        self.compact = compact
        self.scalar = as_scalar(scalar)
        self.basis = basis

    @classmethod
    def _new(cls, compact, scalar, basis):
        x = object.__new__(cls)
        x.compact, x.scalar, x.basis = compact, complex(scalar), basis
        return x

    @classmethod
    def unit(cls, basis):
        return cls._new(_zeros(basis), 1.0, basis)

    @classmethod
    def zero(cls, basis):
        return cls._new(_zeros(basis), 0.0, basis)

    @property
    def dim(self):
        return self.compact.shape[0]

    def _check(self, other):
        if not isinstance(other, UnitizedElement):
            raise TypeError(f"expected UnitizedElement, got {type(other).__name__}")
        if self.basis is not None and other.basis is not None:
            if self.basis is not other.basis and self.basis.key != other.basis.key:
                raise ValueError("basis mismatch")
        elif self.dim != other.dim:
            raise ValueError("basis mismatch")

    def __add__(self, other):
        self._check(other)
        return UnitizedElement._new(self.compact + other.compact, self.scalar + other.scalar,
                                    self.basis or other.basis)

    def __sub__(self, other):
        self._check(other)
        return UnitizedElement._new(self.compact - other.compact, self.scalar - other.scalar,
                                    self.basis or other.basis)

    def __neg__(self):
        return UnitizedElement._new(-self.compact, -self.scalar, self.basis)

    def __mul__(self, c):
        if isinstance(c, UnitizedElement):
            raise TypeError("use @ for the algebra product")
        c = complex(c)
        return UnitizedElement._new(self.compact * c, self.scalar * c, self.basis)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / complex(c))

    def __matmul__(self, other):
        self._check(other)
        a, b = self.compact, self.scalar
        a2, b2 = other.compact, other.scalar
        compact = a @ a2
        if b2 != 0:
            compact = compact + b2 * a
        if b != 0:
            compact = compact + b * a2
        return UnitizedElement._new(compact, b * b2, self.basis or other.basis)

    def adjoint(self):
        return UnitizedElement._new(_adj(self.compact), self.scalar.conjugate(), self.basis)

    def embed(self):
        return embed(self)

    def norm(self):
        return elem_norm(self)

    def dense(self):
        return self.compact.toarray() if _is_sparse(self.compact) else self.compact

    def allclose(self, other, atol=1e-12):
        return elem_norm(self - other) <= atol

    def __repr__(self):
        return f"UnitizedElement(dim={self.dim}, scalar={self.scalar:.6g})"

    # serialization
    def to_json(self):
        m = self.dense()
        return json.dumps({
            "basis": json.loads(self.basis.to_json()) if self.basis is not None else None,
            "compact": np.stack([m.real, m.imag], axis=-1).tolist(),
            "scalar": [self.scalar.real, self.scalar.imag],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else text
        basis = FockBasis.from_json(d["basis"]) if d["basis"] is not None else None
        arr = np.asarray(d["compact"], dtype=float)
        if arr.size == 0:
            m = np.zeros((0, 0), dtype=np.complex128)
        else:
            m = arr[..., 0] + 1j * arr[..., 1]
        return cls(m, complex(*d["scalar"]), basis)


def _zeros(basis):
    d = basis.dim
    if d > DENSE_LIMIT:
        return sp.csr_array((d, d), dtype=np.complex128)
    return np.zeros((d, d), dtype=np.complex128)


def elem_mul(x, y):
    return x @ y


def elem_add(x, y):
    return x + y


def elem_scale(x, c):
    return complex(c) * x


def elem_adjoint(x):
    return x.adjoint()


def embed(x):
    """Window matrix ``compact + scalar * I``."""
    a = x.compact
    if _is_sparse(a):
        return sp.csr_array(a + x.scalar * sp.identity(a.shape[0], dtype=np.complex128, format="csr"))
    return a + x.scalar * np.eye(a.shape[0])


def _support(a):
    if _is_sparse(a):
        coo = sp.coo_array(a)
        nz = coo.data != 0
        return np.union1d(coo.row[nz], coo.col[nz])
    nz = a != 0
    return np.flatnonzero(nz.any(axis=0) | nz.any(axis=1))


def elem_norm(x):
    """Norm of ``compact + scalar * 1`` acting on the untruncated space.

    Equals ``max(||embed(x)||, |scalar|)``: outside the window the element
    acts as ``scalar * 1``. Computed exactly on the support of the compact
    part, where the rest of the window also only sees ``scalar * 1``.
    """
    a, b = x.compact, x.scalar
    S = _support(a)
    if len(S) == 0:
        return abs(b)
    if _is_sparse(a):
        block = sp.csr_array(a)[S][:, S].toarray()
    else:
        block = a[np.ix_(S, S)]
    off = block - np.diag(np.diag(block))
    if not off.any():
        return float(max(np.abs(np.diag(block) + b).max(), abs(b)))
    return max(op_norm(block + b * np.eye(len(S))), abs(b))
