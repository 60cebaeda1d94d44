"""Act with random bisections of the torus on a cotangent path and check the rack laws."""
import numpy as np

from rackoid.generators import random_bisection, random_path
from rackoid.kernel import ManifoldSpec
from rackoid.paths import Bisection
from rackoid.rack import act, compare_paths, self_distributivity_residual

rng = np.random.default_rng(0)
M = ManifoldSpec.torus(2)
S, T = random_bisection(rng, M, 0.3), random_bisection(rng, M, 0.3)
a = random_path(rng, M)

moved = act(S, a)
print("|S > a - a|            ", compare_paths(moved, a))
print("|id > a - a|           ", compare_paths(act(Bisection.identity(2), a), a))
print("self-distributivity    ", self_distributivity_residual(S, T, a))
