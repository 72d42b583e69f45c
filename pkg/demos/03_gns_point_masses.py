"""Point masses of spectral measures in covariant GNS representations.

For each invariant state we build the GNS space on a finite generator set,
read off the covariant contraction ``V`` and compare two estimates of the
point mass of the spectral measure of a vector at an angle: the direct
eigenspace projection and the Fourier (Wiener) average of ``<xi, V^n xi>``.
"""
import numpy as np

from ergodica import GOLDEN, gns_build
from ergodica.gns import isometry_defect, point_mass_direct, point_mass_wiener
from ergodica.modes import ModeElement
from ergodica.systems import boolean_shift, classical_rotation

rot = classical_rotation(GOLDEN, M=3)
g = gns_build(rot.gns_generators, rot.invariant_states[0], rot.endo)
print(f"Haar GNS of the rotation: dim {g.dim}, isometry defect {isometry_defect(g):.1e}")
xi = g.vector_of(ModeElement.scalar_poly({1: 0.6, -2: 0.8}))
for l in (1, -2, 3):
    theta = -2 * np.pi * l * GOLDEN
    d = point_mass_direct(g, xi, theta).mass
    w = point_mass_wiener(g, xi, theta, 10_000).mass
    print(f"  angle of z^{l:+d}:  direct {d:.6f}   Wiener(N=1e4) {w:.6f}")

b = boolean_shift(16)
print("\nboolean shift, L = 16")
for state in b.invariant_states:
    g = gns_build(b.gns_generators, state, b.endo)
    xi = g.vector_of(b.probes[0])
    print(f"  {state.label:12s} dim {g.dim:3d}   defect on probes {isometry_defect(g, b.probes):.1e}"
          f"   mass at 0: {point_mass_direct(g, xi, 0.0).mass:.4f}")
