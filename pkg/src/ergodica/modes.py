"""Trigonometric polynomials with coefficients in a unitized algebra.

A :class:`ModeElement` is ``f(z) = sum_m z^m x_m`` with finitely many modes
``m`` and coefficients ``x_m`` in the unitized algebra over a fixed basis.
Coefficients are stored as stacked arrays: ``compact`` has shape
``(K, d, d)`` and ``scalar`` shape ``(K,)`` for the sorted mode tuple of
length ``K``. With the zero-dimensional basis this is just a scalar
trigonometric polynomial.

The norm is the sup over the circle of the pointwise algebra norm. It is
bracketed on a uniform grid: the grid maximum is a lower bound and adding
``(pi / G) * sum_m |m| ||x_m||`` (a Lipschitz bound times the half spacing)
gives an upper bound.
"""
from __future__ import annotations

import numpy as np

from .algebra import UnitizedElement, elem_norm
from .dynamics import Endomorphism

GRID = 256


def _block_norms(blocks, scalars):
    """``max(||B_g + s_g I||, |s_g|)`` for stacked blocks ``B_g`` (shape (G, k, k))."""
    k = blocks.shape[-1]
    if k == 0:
        return np.abs(scalars)
    eye = np.eye(k)
    full = blocks + scalars[:, None, None] * eye
    off = full * (1 - eye)
    if not off.any():
        vals = np.abs(np.diagonal(full, axis1=1, axis2=2)).max(axis=1)
    else:
        vals = np.linalg.norm(full, ord=2, axis=(1, 2))
    return np.maximum(vals, np.abs(scalars))


class ModeElement:
    """Element ``sum_m z^m x_m`` of ``C(T) (x) A`` with ``A`` a unitized algebra.

    Parameters
    ----------
    modes : sequence of int
        Distinct mode numbers.
    compact : (K, d, d) array_like
        Compact parts of the coefficients, one per mode.
    scalar : (K,) array_like
        Scalar parts of the coefficients.
    basis : FockBasis
    """

    __slots__ = ("modes", "compact", "scalar", "basis")

    def __init__(self, modes, compact, scalar, basis):
        modes = [int(m) for m in modes]
        if len(set(modes)) != len(modes):
            raise ValueError("mode numbers must be distinct")
        compact = np.asarray(compact, dtype=np.complex128)
        scalar = np.asarray(scalar, dtype=np.complex128).reshape(-1)
        d = basis.dim
        if compact.shape != (len(modes), d, d) or scalar.shape != (len(modes),):
            raise ValueError(f"coefficient arrays do not match {len(modes)} modes on a {d}-dim basis")
        if not (np.all(np.isfinite(compact)) and np.all(np.isfinite(scalar))):
            raise ValueError("non-finite coefficients")
        order = np.argsort(modes)
        self.modes = tuple(modes[i] for i in order)
        self.compact = compact[order]
        self.scalar = scalar[order]
        self.basis = basis

    @classmethod
    def _new(cls, modes, compact, scalar, basis):
        x = object.__new__(cls)
        x.modes, x.compact, x.scalar, x.basis = modes, compact, scalar, basis
        return x

    # constructors

    @classmethod
    def from_dict(cls, coeffs, basis=None):
        """Build from ``{m: UnitizedElement}``."""
        if not coeffs:
            raise ValueError("empty coefficient map; pass a basis to ModeElement.zero")
        items = sorted(coeffs.items())
        basis = basis or items[0][1].basis
        d = basis.dim
        compact = np.zeros((len(items), d, d), dtype=np.complex128)
        scalar = np.zeros(len(items), dtype=np.complex128)
        for k, (_, x) in enumerate(items):
            if x.dim != d:
                raise ValueError("coefficient does not match the basis")
            compact[k] = x.dense()
            scalar[k] = x.scalar
        return cls([m for m, _ in items], compact, scalar, basis)

    @classmethod
    def monomial(cls, m, x):
        """``z^m (x) x``."""
        return cls.from_dict({m: x}, x.basis)

    @classmethod
    def unit(cls, basis):
        d = basis.dim
        return cls._new((0,), np.zeros((1, d, d), np.complex128), np.ones(1, np.complex128), basis)

    @classmethod
    def zero(cls, basis):
        d = basis.dim
        return cls._new((0,), np.zeros((1, d, d), np.complex128), np.zeros(1, np.complex128), basis)

    @classmethod
    def scalar_poly(cls, coeffs):
        """Scalar trigonometric polynomial ``{m: c_m}`` over the trivial basis."""
        from .algebra import trivial_basis
        basis = trivial_basis()
        items = sorted(coeffs.items())
        return cls([m for m, _ in items], np.zeros((len(items), 0, 0)), [c for _, c in items], basis)

    def unit_like(self):
        return ModeElement.unit(self.basis)

    # access

    @property
    def dim(self):
        return self.basis.dim

    @property
    def max_mode(self):
        return max((abs(m) for m in self.modes), default=0)

    def coefficient(self, m):
        """Coefficient of ``z^m`` as a :class:`UnitizedElement` (zero when absent)."""
        try:
            k = self.modes.index(int(m))
        except ValueError:
            return UnitizedElement._new(np.zeros((self.dim, self.dim), np.complex128), 0.0, self.basis)
        return UnitizedElement._new(self.compact[k].copy(), self.scalar[k], self.basis)

    def items(self):
        return [(m, self.coefficient(m)) for m in self.modes]

    def prune(self, atol=0.0):
        """Drop modes whose coefficients are entrywise ``<= atol``."""
        keep = [k for k in range(len(self.modes))
                if np.abs(self.compact[k]).max(initial=0.0) > atol or abs(self.scalar[k]) > atol]
        if not keep:
            return ModeElement.zero(self.basis)
        return ModeElement._new(tuple(self.modes[k] for k in keep), self.compact[keep],
                                self.scalar[keep], self.basis)

    # arithmetic

    def _check(self, other):
        if not isinstance(other, ModeElement):
            raise TypeError(f"expected ModeElement, got {type(other).__name__}")
        if self.basis is not other.basis and self.basis.key != other.basis.key:
            raise ValueError("basis mismatch")

    def _combine(self, other, sign):
        self._check(other)
        if self.modes == other.modes:
            return ModeElement._new(self.modes, self.compact + sign * other.compact,
                                    self.scalar + sign * other.scalar, self.basis)
        modes = tuple(sorted(set(self.modes) | set(other.modes)))
        pos = {m: k for k, m in enumerate(modes)}
        d = self.dim
        compact = np.zeros((len(modes), d, d), np.complex128)
        scalar = np.zeros(len(modes), np.complex128)
        ia = [pos[m] for m in self.modes]
        ib = [pos[m] for m in other.modes]
        compact[ia] += self.compact
        scalar[ia] += self.scalar
        compact[ib] += sign * other.compact
        scalar[ib] += sign * other.scalar
        return ModeElement._new(modes, compact, scalar, self.basis)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return ModeElement._new(self.modes, -self.compact, -self.scalar, self.basis)

    def __mul__(self, c):
        if isinstance(c, ModeElement):
            raise TypeError("use @ for the algebra product")
        c = complex(c)
        return ModeElement._new(self.modes, self.compact * c, self.scalar * c, self.basis)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / complex(c))

    def __matmul__(self, other):
        """Pointwise product: coefficients convolve, ``(fg)_k = sum_{m+m'=k} f_m g_m'``."""
        self._check(other)
        out = {}
        for i, m in enumerate(self.modes):
            a, b = self.compact[i], self.scalar[i]
            for j, m2 in enumerate(other.modes):
                a2, b2 = other.compact[j], other.scalar[j]
                c = a @ a2 + b2 * a + b * a2
                s = b * b2
                k = m + m2
                if k in out:
                    out[k][0] += c
                    out[k][1] += s
                else:
                    out[k] = [c, s]
        modes = tuple(sorted(out))
        compact = np.stack([out[k][0] for k in modes])
        scalar = np.array([out[k][1] for k in modes], dtype=np.complex128)
        return ModeElement._new(modes, compact, scalar, self.basis)

    def adjoint(self):
        """``f*(z) = f(z)*``: mode ``m`` goes to ``-m`` with adjoint coefficient."""
        modes = tuple(-m for m in reversed(self.modes))
        compact = np.conj(np.swapaxes(self.compact[::-1], 1, 2))
        return ModeElement._new(modes, np.ascontiguousarray(compact), np.conj(self.scalar[::-1]),
                                self.basis)

    # evaluation and norms

    def evaluate(self, z):
        """Value ``f(z)`` as a :class:`UnitizedElement` (``|z| = 1`` expected)."""
        w = np.asarray(complex(z)) ** np.asarray(self.modes)
        return UnitizedElement._new(np.tensordot(w, self.compact, axes=1), w @ self.scalar, self.basis)

    def evaluate_many(self, zs):
        """Values on an array of points: ``(compact (G, d, d), scalar (G,))``."""
        zs = np.asarray(zs, dtype=np.complex128)
        W = zs[:, None] ** np.asarray(self.modes)[None, :]
        return np.tensordot(W, self.compact, axes=1), W @ self.scalar

    def grid_norms(self, grid=GRID):
        """Pointwise norms ``||f(z_g)||`` at ``z_g = exp(2 pi i g / grid)``."""
        zs = np.exp(2j * np.pi * np.arange(grid) / grid)
        nz = self.compact != 0
        S = np.flatnonzero(nz.any(axis=(0, 1)) | nz.any(axis=(0, 2)))
        block = self.compact[:, S][:, :, S]
        W = zs[:, None] ** np.asarray(self.modes)[None, :]
        return _block_norms(np.tensordot(W, block, axes=1), W @ self.scalar)

    def lipschitz_pad(self, grid=GRID):
        coeff_norms = [elem_norm(self.coefficient(m)) for m in self.modes if m != 0]
        weights = [abs(m) for m in self.modes if m != 0]
        return float(np.pi / grid * np.dot(weights, coeff_norms)) if weights else 0.0

    def sup_norm(self, grid=GRID):
        """Bracket ``(lower, upper)`` of ``sup_z ||f(z)||``."""
        lower = float(self.grid_norms(grid).max())
        return lower, lower + self.lipschitz_pad(grid)

    def norm(self):
        """Certified upper bound on the sup norm (see :meth:`sup_norm`)."""
        return self.sup_norm()[1]

    def norm_upper(self):
        return self.sup_norm()[1]

    def norm_lower(self):
        return self.sup_norm()[0]

    def allclose(self, other, atol=1e-12):
        return (self - other).norm() <= atol

    def __repr__(self):
        return f"ModeElement(modes={self.modes}, dim={self.dim})"


def mode_phases(theta, modes):
    """``exp(2 pi i m theta)`` for each mode ``m``."""
    return np.exp(2j * np.pi * theta * np.asarray(modes, dtype=float))


class ModeSpace:
    """Coordinates of mode elements with modes in ``modes`` over ``basis``.

    Mode blocks are concatenated in mode order, each laid out like
    :class:`~ergodica.dynamics.UnitizedSpace`.
    """

    def __init__(self, basis, modes):
        self.basis = basis
        self.modes = tuple(sorted(int(m) for m in modes))
        self.window_dim = basis.dim
        self.block = basis.dim ** 2 + 1
        self.dim = len(self.modes) * self.block

    def element(self, k):
        v = np.zeros(self.dim, np.complex128)
        v[k] = 1.0
        return self.from_vector(v)

    def vector(self, x):
        d2 = self.window_dim ** 2
        out = np.zeros(self.dim, np.complex128)
        for i, m in enumerate(self.modes):
            c = x.coefficient(m)
            out[i * self.block: i * self.block + d2] = c.dense().ravel()
            out[i * self.block + d2] = c.scalar
        extra = set(x.modes) - set(self.modes)
        if any(np.abs(x.compact[x.modes.index(m)]).max(initial=0) or x.scalar[x.modes.index(m)]
               for m in extra):
            raise ValueError(f"element has modes outside {self.modes}")
        return out

    def from_vector(self, v):
        d = self.window_dim
        v = np.asarray(v, np.complex128).reshape(len(self.modes), self.block)
        return ModeElement._new(self.modes, v[:, : d * d].reshape(-1, d, d).copy(),
                                v[:, d * d].copy(), self.basis)


class ModeEndomorphism(Endomorphism):
    """``alpha(f)(z) = s(f(e^{2 pi i theta} z))``: mode ``m`` picks up ``e^{2 pi i m theta}``.

    Parameters
    ----------
    theta : float
        Rotation number.
    base : ConjugationEndomorphism or None
        Endomorphism ``s`` of the coefficient algebra; ``None`` means identity.
    basis : FockBasis
    M : int
        Mode range ``-M..M`` used for the coordinate space.
    """

    def __init__(self, theta, base, basis, M, label=""):
        self.theta = float(theta)
        self.base = base
        self.basis = basis
        self.M = int(M)
        super().__init__(self._act, label=label or f"rotation(theta={self.theta:.12g})",
                         mult_defect_bound=getattr(base, "mult_defect_bound", 0.0),
                         safe_horizon=getattr(base, "safe_horizon", None),
                         space=ModeSpace(basis, range(-self.M, self.M + 1)))

    def _act(self, f):
        ph = mode_phases(self.theta, f.modes)
        compact = f.compact if self.base is None else self.base.apply_compact(f.compact)
        return ModeElement._new(f.modes, compact * ph[:, None, None], f.scalar * ph, f.basis)
