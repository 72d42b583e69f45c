"""The irrational rotation tensored with the boolean shift.

Its peripheral point spectrum is ``{e^{2 pi i l theta}}`` (truncated to the
kept modes), both for the endomorphism itself and for the union over the
invariant states of the GNS isometries. Cesaro averages at an eigenvalue
pick out the matching Fourier mode.
"""
import numpy as np

from ergodica import GOLDEN, cesaro
from ergodica.modes import ModeElement
from ergodica.spectrum import containment_check, full_peripheral, peripheral_pp_endo
from ergodica.systems import classical_rotation, rotation_tensor_boolean

rb = rotation_tensor_boolean(GOLDEN, M=2, L=6)
endo = peripheral_pp_endo(rb.endo)
full = full_peripheral(rb)
fmt = lambda vals: ", ".join(f"{np.angle(z) / (2 * np.pi):+.6f}" for z in vals)  # noqa: E731
print("peripheral angles / 2 pi")
print("  endomorphism :", fmt(endo.distinct()))
print("  GNS family   :", fmt(full.distinct()))
rep = containment_check(endo, full)
print(f"  contained: {rep.contained}, extra GNS eigenvalues: {len(rep.extra)}")

print("\nclassical rotation: averages at lambda_l converge to c_l z^l")
rot = classical_rotation(GOLDEN, M=3)
c = {m: 1.0 / 7 for m in range(-3, 4)}
x = ModeElement.scalar_poly(c)
for l in (-3, 1, 2):
    e = rot.eigen_element(l)
    for n in (100, 10_000):
        res = (cesaro(rot.endo, x, e.lam, n) - ModeElement.scalar_poly({l: c[l]})).norm()
        print(f"  l = {l:+d}  n = {n:6d}   residual = {res:.2e}")
