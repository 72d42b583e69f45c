"""Peripheral point spectrum of endomorphisms and of covariant contractions.

An endomorphism is turned into a matrix over element coordinates (the
superoperator) and diagonalized. Two structured cases avoid the dense
superoperator:

* modewise endomorphisms, whose spectrum is the coefficient endomorphism's
  spectrum multiplied by ``exp(2 pi i m theta)`` per mode;
* conjugations by a partial permutation ``V``, where the peripheral part of
  ``Ad_V`` comes from the cycles of ``V`` (products ``mu_i conj(mu_j)``)
  together with the scalar coordinate.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algebra import UnitizedElement
from .dynamics import ConjugationEndomorphism, UnitizedSpace
from .gns import gns_build, invariance_residual
from .modes import ModeElement, ModeEndomorphism, mode_phases
from .numerics import eig_general

WINDOW_CAP = 20
PERIPHERAL_TOL = 1e-6


class SuperoperatorCapError(ValueError):
    """Window too large for a dense superoperator."""


@dataclass(frozen=True)
class Superoperator:
    """Matrix of an endomorphism over the coordinates of its space."""

    dim: int
    matrix: np.ndarray
    space: object

    def apply(self, x):
        return self.space.from_vector(self.matrix @ self.space.vector(x))


def build_superoperator(endo, cap=WINDOW_CAP):
    """Columns are ``Phi`` applied to the coordinate basis elements.

    Raises
    ------
    SuperoperatorCapError
        If the window dimension exceeds ``cap``. Use the Fourier (Wiener)
        point-mass estimates on a GNS representation instead.
    """
    space = endo.space
    if space is None:
        raise ValueError(f"{endo!r} has no coordinate space")
    if space.window_dim > cap:
        raise SuperoperatorCapError(
            f"window dimension {space.window_dim} exceeds the superoperator cap {cap}; "
            "use point_mass_wiener / point_mass_direct on a GNS representation instead")
    cols = [space.vector(endo(space.element(k))) for k in range(space.dim)]
    return Superoperator(space.dim, np.column_stack(cols), space)


@dataclass
class PeripheralEigen:
    lam: complex
    element: object
    residual: float
    modulus_gap: float


@dataclass
class SpectrumReport:
    """Peripheral eigenvalues with eigen-elements (or vectors) and residuals.

    ``interior_radius`` is the largest modulus among the discarded
    eigenvalues (0 when none were computed).
    """

    peripheral: list
    tol_used: float
    interior_radius: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def values(self):
        return np.array([p.lam for p in self.peripheral], dtype=np.complex128)

    def distinct(self, tol=None):
        return dedup(self.values, self.tol_used if tol is None else tol)

    @property
    def inverse_closed(self):
        vals = self.values
        return all(np.min(angular_distance(np.conj(v), vals)) <= self.tol_used for v in vals)

    def to_json(self):
        return json.dumps({
            "peripheral": [{"lambda": [p.lam.real, p.lam.imag], "residual": float(p.residual),
                            "modulus_gap": float(p.modulus_gap)} for p in self.peripheral],
            "tol": self.tol_used,
        }, sort_keys=True)


def angular_distance(a, b):
    """``|arg(a / b)|`` for unimodular-ish complex numbers (broadcasting)."""
    return np.abs(np.angle(np.asarray(a) * np.conj(np.asarray(b))))


def dedup(values, tol):
    out = []
    for v in sorted(np.asarray(values, np.complex128).tolist(), key=lambda z: np.angle(z)):
        if not out or np.min(angular_distance(v, out)) > tol:
            out.append(v)
    return np.array(out, dtype=np.complex128)


def same_set(a, b, tol):
    """Both sets agree up to angular distance ``tol``."""
    a, b = np.asarray(a), np.asarray(b)
    if len(a) == 0 or len(b) == 0:
        return len(a) == len(b)
    return (all(np.min(angular_distance(x, b)) <= tol for x in a)
            and all(np.min(angular_distance(y, a)) <= tol for y in b))


def _entry(endo, x, lam):
    n = x.norm()
    x = x / n
    return PeripheralEigen(complex(lam), x, float((endo(x) - lam * x).norm()), abs(abs(lam) - 1.0))


def _from_dense(endo, tol, cap):
    S = build_superoperator(endo, cap)
    dec = eig_general(S.matrix)
    periph = np.abs(dec.eigenvalues) >= 1 - tol
    inner = np.abs(dec.eigenvalues[~periph])
    entries = []
    for k in np.flatnonzero(periph):
        x = S.space.from_vector(dec.eigenvectors[:, k])
        e = _entry(endo, x, dec.eigenvalues[k])
        if e.residual <= tol:
            entries.append(e)
    return SpectrumReport(entries, tol, float(inner.max(initial=0.0)))


def _identity_report(endo, space, tol):
    entries = [PeripheralEigen(1.0 + 0j, space.element(k) / space.element(k).norm(), 0.0, 0.0)
               for k in range(space.dim)]
    return SpectrumReport(entries, tol, 0.0)


def _permutation_cycles(sigma):
    """Cycles of a partial injection ``i -> sigma[i]`` (chains are skipped)."""
    seen = np.zeros(len(sigma), bool)
    cycles = []
    for start in range(len(sigma)):
        if seen[start]:
            continue
        path, i = [], start
        while i >= 0 and not seen[i]:
            seen[i] = True
            path.append(i)
            i = sigma[i]
        if i >= 0 and i in path:
            cycles.append(path[path.index(i):])
    return cycles


def _conjugation_report(endo, tol):
    """Peripheral part of ``Ad_V`` for a partial permutation ``V``."""
    d = endo.basis.dim
    pairs = []
    for cyc in _permutation_cycles(endo.sigma):
        ell = len(cyc)
        for k in range(ell):
            mu = np.exp(2j * np.pi * k / ell)
            v = np.zeros(d, np.complex128)
            v[cyc] = mu ** -np.arange(ell) / np.sqrt(ell)
            pairs.append((mu, v))
    entries = []
    for mu_i, vi in pairs:
        for mu_j, vj in pairs:
            x = UnitizedElement._new(np.outer(vi, vj.conj()), 0.0, endo.basis)
            entries.append(_entry(endo, x, mu_i * np.conj(mu_j)))
    entries.append(_entry(endo, UnitizedElement.unit(endo.basis), 1.0))
    return SpectrumReport(entries, tol, 0.0, ["partial-permutation fast path"])


def peripheral_pp_endo(endo, tol=PERIPHERAL_TOL, cap=WINDOW_CAP):
    """Peripheral point spectrum of an endomorphism.

    Eigen-elements are normalized in the algebra norm and each listed value
    has ``||Phi(x) - lam x|| <= tol``.
    """
    if isinstance(endo, ModeEndomorphism):
        base = endo.base
        if base is None:
            base_report = _identity_report(None, UnitizedSpace(endo.basis), tol)
        else:
            base_report = peripheral_pp_endo(base, tol, cap)
        entries = []
        modes = range(-endo.M, endo.M + 1)
        for m, ph in zip(modes, mode_phases(endo.theta, modes)):
            for e in base_report.peripheral:
                f = ModeElement.monomial(m, e.element)
                entries.append(_entry(endo, f, ph * e.lam))
        return SpectrumReport(entries, tol, base_report.interior_radius,
                              ["modewise fast path"] + base_report.notes)
    if endo.space is not None and endo.space.window_dim <= cap:
        return _from_dense(endo, tol, cap)
    if isinstance(endo, ConjugationEndomorphism) and endo.sigma is not None:
        return _conjugation_report(endo, tol)
    return _from_dense(endo, tol, cap)


def peripheral_pp_isometry(g, tol=PERIPHERAL_TOL):
    """Unit-modulus eigenvalues of the covariant contraction ``V`` of a GNS build."""
    if g.dim == 0:
        return SpectrumReport([], tol)
    dec = eig_general(g.covariant_op)
    periph = np.abs(dec.eigenvalues) >= 1 - tol
    keep = periph & (dec.residuals <= tol)
    entries = [PeripheralEigen(complex(dec.eigenvalues[k]), dec.eigenvectors[:, k],
                               float(dec.residuals[k]), abs(abs(dec.eigenvalues[k]) - 1.0))
               for k in np.flatnonzero(keep)]
    inner = np.abs(dec.eigenvalues[~periph])
    return SpectrumReport(entries, tol, float(inner.max(initial=0.0)))


class NonInvariantStateError(ValueError):
    """A state in the family is not invariant under the endomorphism."""


def full_peripheral(system, states=None, tol=PERIPHERAL_TOL, jobs=1):
    """Union of the GNS peripheral spectra over a family of invariant states.

    ``system`` needs ``endo``, ``gns_generators``, ``probes`` and
    ``invariant_states`` (used when ``states`` is None).
    """
    states = list(system.invariant_states if states is None else states)
    for s in states:
        r = invariance_residual(s, system.endo, system.probes)
        if r > tol:
            raise NonInvariantStateError(f"state {s.label!r} has invariance residual {r:.3e}")

    def one(state):
        return peripheral_pp_isometry(gns_build(system.gns_generators, state, system.endo), tol)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            reports = list(pool.map(one, states))
    else:
        reports = [one(s) for s in states]
    merged = []
    for rep in reports:
        for e in rep.peripheral:
            if not merged or np.min(angular_distance(e.lam, [m.lam for m in merged])) > tol:
                merged.append(e)
    return SpectrumReport(merged, tol, max((r.interior_radius for r in reports), default=0.0))


@dataclass(frozen=True)
class ContainmentReport:
    contained: bool
    missing: tuple
    extra: tuple
    tol: float


def containment_check(endo_report, full_report, tol=PERIPHERAL_TOL):
    """Check that every endomorphism eigenvalue appears in the full spectrum.

    ``extra`` lists full-spectrum values not seen in the endomorphism
    spectrum (strict containment).
    """
    a = endo_report.distinct(tol)
    b = full_report.distinct(tol)
    missing = tuple(complex(x) for x in a if len(b) == 0 or np.min(angular_distance(x, b)) > tol)
    extra = tuple(complex(y) for y in b if len(a) == 0 or np.min(angular_distance(y, a)) > tol)
    return ContainmentReport(not missing, missing, extra, tol)
