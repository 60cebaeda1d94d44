import math

import numpy as np
import pytest

from rackoid import expr as E
from rackoid.generators import (
    ideal_generator, random_bisection, random_symplectic_apath, random_zero_poisson_bisection,
    random_zero_poisson_path, standard_symplectic,
)
from rackoid.integration import (
    BisectionFamily, PreconditionError, admissible_tangent, apath_from_covector, apath_residual,
    congruence_invariance_residual, dbeta_constancy_residual, default_cutoff, family_defect, formulation_gap,
    integrate_symplectic, integrate_zero_poisson, omega_D, rack_descends_residual, reduction_form_residual,
    relation_b_vs_c_residual, rigidity_residual, split_section, split_section_residual, tangent_cone_residual,
)
from rackoid.kernel import one_form
from rackoid.paths import Bisection, CotangentPath, Isotopy
from rackoid.randomfields import random_isotopy_components, random_one_form
from rackoid.suites import _families, _random_admissible
from rackoid.symplectic import DiracStructure, flat, omega_Y, symplectic_bisection

t = E.var("t")


@pytest.fixture
def fams(rng, T2):
    return _families(rng, T2, 0.3)


class TestCongruence:
    def test_formulations_agree(self, rng, T2, fams):
        pts = T2.random_points(rng, 8)
        for F in fams:
            assert formulation_gap(F, pts, T2) <= 1e-6

    def test_admissible_families_have_no_defect(self, rng, T2, fams):
        pts = T2.random_points(rng, 8)
        FA, FB, _ = fams
        assert family_defect(FA, pts, T2) <= 1e-6
        assert family_defect(FB, pts, T2) <= 1e-6
        assert dbeta_constancy_residual(FA, pts, T2) <= 1e-6
        assert dbeta_constancy_residual(FB, pts, T2) <= 1e-6

    def test_generic_family_is_detected(self, rng, T2, fams):
        pts = T2.random_points(rng, 8)
        assert family_defect(fams[2], pts, T2) >= 1e-3

    def test_transport_and_rigidity(self, rng, T2, fams):
        pts = T2.random_points(rng, 4)
        T = random_bisection(rng, T2, 0.3)
        moved, rest = congruence_invariance_residual(T, fams[1], pts, T2)
        assert moved <= 1e-6 and rest <= 1e-6
        assert rigidity_residual(fams[0], T, pts, T2) <= 1e-6


class TestTangentCone:
    def test_generator_is_tangent(self, rng, T2):
        pts = T2.random_points(rng, 8)
        assert tangent_cone_residual(ideal_generator(rng, T2, 0.3), pts, T2) <= 1e-10

    def test_cutoff_properties(self):
        s = np.array([0.0, 1.0])
        assert np.max(np.abs(E.evaluate([default_cutoff()], {"s": s})[0])) <= 1e-15
        assert abs(float(E.evaluate(E.quad(default_cutoff(), "s", 64), {})) - 1.0) <= 1e-12

    def test_zero_form_splits_to_zero(self, rng, T2):
        pts = T2.random_points(rng, 4)
        zero = one_form([E.ZERO, E.ZERO], 2)
        assert split_section_residual(zero, Bisection.identity(2), pts, T2) <= 1e-14

    def test_split_roundtrip_identity(self, rng, T2):
        pts = T2.random_points(rng, 8)
        alpha = random_one_form(rng, 2, 0.3)
        assert split_section_residual(alpha, Bisection.identity(2), pts, T2) <= 1e-8

    def test_split_roundtrip_random(self, rng, T2):
        pts = T2.random_points(rng, 8)
        alpha = random_one_form(rng, 2, 0.3)
        assert split_section_residual(alpha, random_bisection(rng, T2, 0.3), pts, T2) <= 1e-6

    def test_bad_cutoff_rejected(self, rng):
        alpha = random_one_form(rng, 2, 0.3)
        with pytest.raises(PreconditionError):
            split_section(alpha, Bisection.identity(2), chi=E.ONE + E.var("s"))


class TestAPaths:
    def test_straight_line_is_apath(self):
        om, D = standard_symplectic(1.0)
        a = CotangentPath((t, E.ZERO), flat(om, (E.ONE, E.ZERO)))
        assert apath_residual(D, a) <= 1e-14

    def test_wrong_covector_is_not(self):
        _, D = standard_symplectic(1.0)
        a = CotangentPath((t, E.ZERO), (E.ONE, E.ZERO))
        assert apath_residual(D, a) >= 0.5

    def test_integrated_covector_path(self, rng, C2):
        _, D = standard_symplectic(1.5)
        a = apath_from_covector(D, [0.1, -0.2], (E.cos(t), t), steps=128)
        assert apath_residual(D, a) <= 1e-8

    def test_dirac_kind_required(self):
        om, _ = standard_symplectic(1.0)
        D = DiracStructure.two_form(om)
        with pytest.raises(ValueError):
            apath_residual(D, CotangentPath.constant([0.0, 0.0]))


class TestIntegrateZero:
    def test_source_and_covector(self):
        a = CotangentPath((E.const(0.3), E.const(-0.1)), (E.ONE, 2 * t))
        g = integrate_zero_poisson(a)
        assert np.allclose(g.source, [0.3, -0.1], atol=1e-15)
        assert np.allclose(g.covector, [1.0, 1.0], atol=1e-12)

    def test_moving_path_rejected(self):
        with pytest.raises(PreconditionError):
            integrate_zero_poisson(CotangentPath((t, E.ZERO), (E.ZERO, E.ZERO)))

    @pytest.mark.parametrize("dim", [2, 3])
    def test_action_descends(self, rng, T2, T3, dim):
        M = T2 if dim == 2 else T3
        D0 = DiracStructure.poisson([[E.ZERO] * dim for _ in range(dim)])
        S = random_zero_poisson_bisection(rng, M, 0.3)
        a = random_zero_poisson_path(rng, M)
        res = rack_descends_residual(D0, S, a, case="zero")
        assert res["subrackoid"] <= 1e-12 and res["invariance"] <= 1e-12

    def test_classification(self, rng, T2):
        a = random_zero_poisson_path(rng, T2)
        kappa = (E.cos(2 * math.pi * t), t - 0.5)
        b = CotangentPath(a.gamma, tuple(x + k for x, k in zip(a.theta, kappa)))
        I0, I1 = integrate_zero_poisson(a), integrate_zero_poisson(b)
        assert np.max(np.abs(I0.covector - I1.covector)) <= 1e-12
        c = CotangentPath(a.gamma, tuple(x + 1.0 for x in a.theta))
        assert np.max(np.abs(integrate_zero_poisson(c).covector - I0.covector)) >= 0.5


class TestIntegrateSymplectic:
    def test_line_endpoints(self):
        om, D = standard_symplectic(1.0)
        a = CotangentPath((t, E.ZERO), flat(om, (E.ONE, E.ZERO)))
        g = integrate_symplectic(D, a)
        assert np.allclose(g.source, [0.0, 0.0], atol=1e-15)
        assert np.allclose(g.target, [1.0, 0.0], atol=1e-15)

    def test_constant_path_is_unit(self):
        _, D = standard_symplectic(2.0)
        g = integrate_symplectic(D, CotangentPath.constant([0.2, 0.4]))
        assert np.allclose(g.source, g.target)

    def test_non_apath_rejected(self):
        _, D = standard_symplectic(1.0)
        with pytest.raises(PreconditionError):
            integrate_symplectic(D, CotangentPath((t, E.ZERO), (E.ZERO, E.ZERO)))

    def test_omega_D_antisymmetric(self, rng):
        om, _ = standard_symplectic(1.3)
        v = (rng.normal(size=2), rng.normal(size=2))
        w = (rng.normal(size=2), rng.normal(size=2))
        assert abs(omega_D(om, v, w) + omega_D(om, w, v)) <= 1e-14

    def test_reduction_form(self, rng, C2):
        om, D = standard_symplectic(1.4)
        a = random_symplectic_apath(rng, D, C2, steps=128)
        v, w = _random_admissible(rng, om), _random_admissible(rng, om)
        assert reduction_form_residual(om, D, a, v, w) <= 1e-4

    def test_endpoint_fixing_tangents_are_kernel(self, rng, C2):
        om, D = standard_symplectic(1.4)
        a = random_symplectic_apath(rng, D, C2, steps=128)
        k = _random_admissible(rng, om, fix=True)
        for _ in range(3):
            assert abs(omega_Y(a, k, _random_admissible(rng, om))) <= 1e-4

    def test_inadmissible_tangent_rejected(self, rng, C2):
        om, D = standard_symplectic(1.0)
        a = random_symplectic_apath(rng, D, C2, steps=64)
        bad = admissible_tangent(om, (t, E.ZERO))
        bad = type(bad)(bad.delta_gamma, (E.ONE, E.ONE))
        with pytest.raises(PreconditionError):
            reduction_form_residual(om, D, a, bad, bad)

    def test_descent(self, rng, C2):
        om, D = standard_symplectic(1.2)
        phi = Isotopy.from_components(random_isotopy_components(rng, 2, 0.2, scale=0.5))
        S = symplectic_bisection(phi, om)
        a = random_symplectic_apath(rng, D, C2, steps=128)
        res = rack_descends_residual(D, S, a)
        assert res["subrackoid"] <= 1e-6 and res["endpoint"] <= 1e-8


class TestRelations:
    def _family(self, om, m0, extra):
        e = E.var("e")
        base = [m0[0] + 0.2 * t, m0[1] - 0.1 * t * t]
        g = [b + e * x for b, x in zip(base, extra)]
        return CotangentPath(tuple(g), flat(om, tuple(E.diff(x, "t") for x in g)))

    def test_endpoint_fixing_satisfies_both(self, rng):
        om, D = standard_symplectic(1.0)
        m0 = np.array([0.1, 0.2])
        F = self._family(om, m0, [0.1 * E.sin(math.pi * t), -0.2 * E.sin(math.pi * t)])
        b, c = relation_b_vs_c_residual(om, D, F, m0, rng, panel=3, basis=4)
        assert b <= 1e-4 and c <= 1e-4

    def test_endpoint_moving_fails_both(self, rng):
        om, D = standard_symplectic(1.0)
        m0 = np.array([0.1, 0.2])
        F = self._family(om, m0, [0.3 * t, 0.2 * t])
        b, c = relation_b_vs_c_residual(om, D, F, m0, rng, panel=3, basis=4)
        assert b >= 1e-2 and c >= 1e-2
