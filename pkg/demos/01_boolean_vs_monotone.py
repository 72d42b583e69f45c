"""Two shifts, two fates for the same kind of average.

On the boolean Fock space the Cesaro averages of a one-site projection
converge in norm, at rate 1/n, to the vacuum expectation. On the monotone
Fock space the averages of the number-like projection ``m_0 m+_0`` converge
only weakly: every matrix element decays like 1/n, yet the averages stay a
full unit of norm away from their weak limit ``P_Omega``.
"""
import numpy as np

from ergodica import UnitizedElement, cesaro, ket_bra
from ergodica.dynamics import CesaroAccumulator
from ergodica.systems import boolean_shift, monotone_bound_check, monotone_shift, number_projection

print("boolean shift, L = 128, x = |e_0><e_0|")
b = boolean_shift(128)
x = UnitizedElement(ket_bra(b.basis, (0,), (0,)), 0.0, b.basis)
for n in (8, 16, 32, 64):
    res = (cesaro(b.endo, x, 1.0, n) - b.exact_E1(x)).norm()
    print(f"  n = {n:3d}   ||M(n) - E_1(x)|| = {res:.6f}   1/n = {1 / n:.6f}")

print("\nmonotone shift, L = 40, p = 2, a = m_0 m+_0")
m = monotone_shift(40, 2)
a = number_projection(m, 0)
P = UnitizedElement(ket_bra(m.basis, (), (), sparse=True), 0.0, m.basis)
acc = CesaroAccumulator(m.endo, a, 1.0)
for n in (1, 5, 10, 20, 30):
    acc.advance(n - acc.n)
    D = acc.mean() - P
    e = np.zeros(m.basis.dim)
    e[m.basis.index((n,))] = 1.0
    witness = np.linalg.norm(D.compact @ e + D.scalar * e)
    print(f"  n = {n:3d}   ||(M(n) - P_Omega) e_n|| = {witness:.3f}")

print("\n...while matrix elements still obey the 4/(n|lam - 1|) bound")
for lam in (-1.0, np.exp(1j * np.pi / 3)):
    for n in (5, 10, 20):
        rep = monotone_bound_check(m, 0, lam, n, trials=100, seed=n)
        print(f"  lam = {lam:.3f}  n = {n:2d}   max = {rep.max_value:.4f}   bound = {rep.bound:.4f}"
              f"   violations = {rep.violations}")
