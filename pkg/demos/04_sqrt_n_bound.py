"""The 1/sqrt(n) bound for rank-one parts, and why long runs use the block variant.

A rank-one boolean coefficient ``|e_j><Omega|`` is pushed to orthogonal
positions by the shift, so its Cesaro average has norm at most
``||f||_inf / sqrt(n)`` at every point of the circle. The truncated window
caps n at its safe horizon; the vacuum block (``C P_Omega + C 1``) is
exactly invariant and supports runs of any length.
"""
import numpy as np

from ergodica import GOLDEN, UnitizedElement, cesaro, ket_bra
from ergodica.dynamics import HorizonError
from ergodica.modes import ModeElement
from ergodica.systems import (reduce_to_block, rotation_block_variant, rotation_tensor_boolean,
                              sqrt_n_bound_check)

b = rotation_tensor_boolean(GOLDEN, M=1, L=40)
a = UnitizedElement(ket_bra(b.basis, (3,), ()), 0.0, b.basis)
f = ModeElement.monomial(1, a) + ModeElement.monomial(-1, 0.5 * a)
print(f"safe horizon {b.safe_horizon}")
for n in (1, 4, 16, 25, 38):
    rep = sqrt_n_bound_check(b, f, n)
    print(f"  n = {n:2d}   max_z ||M(n)(z)|| = {rep.max_value:.4f}   bound = {rep.bound:.4f}")
try:
    sqrt_n_bound_check(b, f, 60)
except HorizonError as exc:
    print(f"  n = 60 refused: {exc}")

block = rotation_block_variant(GOLDEN, M=1)
P = UnitizedElement(ket_bra(b.basis, (), ()), 0.0, b.basis)
g = reduce_to_block(ModeElement.monomial(1, P) + ModeElement.monomial(0, 0.5 * P))
lam = block.eigen_element(1).lam
print("\nvacuum block, lambda = e^{2 pi i theta}")
for n in (100, 1000, 10_000):
    res = (cesaro(block.endo, g, lam, n) - reduce_to_block(ModeElement.monomial(1, P))).norm()
    print(f"  n = {n:6d}   residual = {res:.2e}   2/(n|1 - lam|) = {2 / (n * abs(1 - lam)):.2e}")
