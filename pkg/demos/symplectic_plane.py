"""Integrate an A-path of a constant symplectic form on the plane and move it by a bisection."""
import numpy as np

from rackoid.generators import random_symplectic_apath, standard_symplectic
from rackoid.integration import apath_residual, integrate_symplectic, rack_descends_residual
from rackoid.kernel import ManifoldSpec
from rackoid.paths import Isotopy
from rackoid.randomfields import random_isotopy_components
from rackoid.symplectic import symplectic_bisection

rng = np.random.default_rng(1)
M = ManifoldSpec.chart(2)
omega, D = standard_symplectic(1.5)
a = random_symplectic_apath(rng, D, M, steps=128)
g = integrate_symplectic(D, a)
print("A-path residual ", apath_residual(D, a))
print("source, target  ", g.source, g.target)

S = symplectic_bisection(Isotopy.from_components(random_isotopy_components(rng, 2, 0.2, scale=0.5)), omega)
for key, value in rack_descends_residual(D, S, a).items():
    print(f"{key:16s}{value:.3e}")
