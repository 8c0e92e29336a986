import numpy as np
import pytest

from dpwnoids.errors import InvalidInputError, MonodromyStructureError, TransportError
from dpwnoids.loops import (
    LaurentLoop,
    LoopMatrix,
    loop_exp,
    loop_from_coeffs,
    wiener_norm,
)
from dpwnoids.potential import DelaunayPotential, NnoidPotential, initial_condition
from dpwnoids.transport import (
    PathSpec,
    end_loop,
    integrate,
    integrate_with_info,
    m_tilde,
    m_tilde_at_zero,
    monodromy,
    route,
)
from dpwnoids.weierstrass import jorge_meeks, periods


@pytest.fixture(scope="module")
def trinoid():
    return jorge_meeks(3, degree=8)


class ZeroPotential:
    def __init__(self, rho=2.0, degree=8):
        from dpwnoids.loops import grid_size
        self.rho, self.degree, self.grid = rho, degree, grid_size(degree)

    def singular_points(self):
        return np.array([])

    def coeff_array_at(self, z):
        return np.zeros((2, 2, 2 * self.degree + 1), dtype=complex), 0.0


class TestPaths:
    def test_keyhole_closed(self):
        p = PathSpec.keyhole(0.0, 1.0, 0.4)
        assert p.is_closed()

    def test_circle_endpoints(self):
        p = PathSpec.circle(1j, 0.5, start_angle=0.3)
        assert p.start == pytest.approx(p.end)
        assert abs(p.start - 1j) == pytest.approx(0.5)

    def test_reversed(self):
        p = PathSpec.keyhole(0.0, 1.0, 0.4)
        r = p.reversed()
        assert r.start == pytest.approx(p.end)
        assert r.end == pytest.approx(p.start)

    def test_length(self):
        assert PathSpec.line(0, 3 + 4j).length() == pytest.approx(5.0)
        assert PathSpec.circle(0, 2.0).length() == pytest.approx(4 * np.pi)

    def test_clearance(self):
        p = PathSpec.line(-1.0, 1.0)
        assert p.min_clearance([1j]) == pytest.approx(1.0, abs=1e-3)

    def test_route_detours(self):
        path = route(-1.0, 1.0, [0.0j], clearance=0.05)
        assert path.min_clearance([0.0j]) >= 0.05
        assert path.start == -1.0 and path.end == 1.0


class TestIntegrate:
    def test_zero_potential_is_identity_transport(self):
        phi0 = LoopMatrix.identity(degree=8)
        out = integrate(ZeroPotential(), PathSpec.line(0, 1 + 1j), phi0)
        assert (out - phi0).norm() == 0.0

    def test_delaunay_closed_form(self):
        # from z=1 with identity start at t=0: Phi(z) = [[cosh, sinh], [sinh, cosh]](log z / 2)
        pot = DelaunayPotential(0.0, degree=8)
        phi0 = LoopMatrix.identity(degree=8)
        for z in (2.0, 0.5, 1.0 + 0.8j):
            out = integrate(pot, PathSpec.line(1.0, z), phi0)
            w = np.log(z) / 2  # principal branch fine: path misses the cut
            want = np.array([[np.cosh(w), np.sinh(w)], [np.sinh(w), np.cosh(w)]])
            got = out.at(1.0)
            assert np.max(np.abs(got - want)) < 1e-10

    def test_nnoid_zero_time_closed_form(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(0.0, trinoid)
        cp = trinoid.central()
        for z in (0.3 + 0.2j, -0.4j, 0.25):
            out = integrate(pot, PathSpec.line(0.0, z), phi0)
            want = np.array([[cp.g(z), 1.0], [-1.0, 0.0]])
            assert np.max(np.abs(out.at(1.0) - want)) < 1e-9

    def test_det_preserved(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(2e-3, trinoid)
        out, info = integrate_with_info(pot, end_loop(trinoid, 0, 0.0), phi0)
        assert info["det_defect"] < 1e-9

    def test_homotopic_paths_agree(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(2e-3, trinoid)
        z1 = -0.55 - 0.1j
        direct = integrate(pot, PathSpec.line(0.0, z1), phi0)
        detour = integrate(pot, PathSpec.polyline([0.0, -0.3 - 0.45j, z1]), phi0)
        assert (direct - detour).circle_operator_norm() < 5e-10

    def test_path_near_pole_rejected(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(0.0, trinoid)
        with pytest.raises(TransportError):
            integrate(pot, PathSpec.line(0.0, 1.0), phi0)


class TestMonodromy:
    def test_zero_time_monodromy_is_identity(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(0.0, trinoid)
        for i in range(2):
            m = monodromy(pot, end_loop(trinoid, i, 0.0), phi0)
            assert (m - LoopMatrix.identity(m.rho, m.degree)).circle_operator_norm() < 1e-9

    def test_delaunay_monodromy_exponential(self):
        t = 0.01
        pot = DelaunayPotential(t, degree=8)
        phi0 = LoopMatrix.identity(degree=8)
        m = monodromy(pot, PathSpec.circle(0.0, 1.0), phi0)
        want = loop_exp(pot.residue() * (2j * np.pi))
        assert (m - want).circle_operator_norm() < 1e-9
        # closing conditions at lambda = 1: M = -I with vanishing derivative
        assert np.max(np.abs(m.at(1.0) + np.eye(2))) < 1e-9
        assert np.max(np.abs(m.d_lambda_at(1.0))) < 1e-8

    def test_orientation_reversal_inverts(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(1e-3, trinoid)
        gamma = end_loop(trinoid, 0, 0.0)
        m = monodromy(pot, gamma, phi0)
        m_rev = monodromy(pot, gamma.reversed(), phi0)
        prod = m @ m_rev
        assert (prod - LoopMatrix.identity(m.rho, m.degree)).circle_operator_norm() < 1e-9

    def test_open_path_rejected(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        with pytest.raises(InvalidInputError):
            monodromy(NnoidPotential(0.0, trinoid), PathSpec.line(0, 0.5), phi0)


class TestMTilde:
    def test_exact_cancellation(self):
        # M = exp(t (lambda-1)^2 / (4 lambda) C) gives back C
        t = 1e-3
        c_mat = np.array([[0.2j, 0.3 - 0.1j], [-0.25, -0.2j]])
        mu = loop_from_coeffs({-1: t / 4, 0: -t / 2, 1: t / 4}, degree=8)
        a = LoopMatrix.from_entries(
            [[mu * c_mat[0, 0], mu * c_mat[0, 1]], [mu * c_mat[1, 0], mu * c_mat[1, 1]]])
        m = loop_exp(a)
        got = m_tilde(t, m)
        want = LoopMatrix.from_constant(c_mat, degree=8)
        assert (got - want).circle_operator_norm() < 1e-9

    def test_zero_time_formula_matches_periods(self, trinoid):
        mt = m_tilde_at_zero(trinoid, 0)
        table = periods(trinoid.central())
        got = mt.at(1.0)
        want = np.array([[table.P[0, 1], table.P[0, 2]],
                         [-table.P[0, 0], -table.P[0, 1]]])
        assert np.max(np.abs(got - want)) < 1e-9
        assert wiener_norm(mt.trace()) < 1e-12

    def test_finite_t_consistency(self, trinoid):
        # transport + rescale at small t approaches the t=0 period formula
        t = 1e-4
        phi0 = initial_condition(trinoid, 0.0)
        pot = NnoidPotential(t, trinoid)
        m = monodromy(pot, end_loop(trinoid, 0, 0.0), phi0)
        approx = m_tilde(t, m)
        limit = m_tilde_at_zero(trinoid, 0)
        assert (approx - limit).circle_operator_norm() < 1e-3

    def test_non_divisible_rejected(self):
        stray = loop_from_coeffs({0: 1e-3, 1: 2e-3}, degree=8)
        zero = loop_from_coeffs({0: 0.0}, degree=8)
        m = loop_exp(LoopMatrix.from_entries([[zero, stray], [zero, zero]]))
        with pytest.raises(MonodromyStructureError):
            m_tilde(1e-3, m)

    def test_zero_t_rejected(self):
        with pytest.raises(InvalidInputError):
            m_tilde(0.0, LoopMatrix.identity(degree=4))


class TestCentralSymmetry:
    def test_period_matrix_antihermitian_at_center(self, trinoid):
        # at the central value the period matrix already sits in the unitary
        # loop algebra: entries satisfy f + f* = 0 pairings
        mt = m_tilde_at_zero(trinoid, 0)
        assert mt.su2_algebra_defect() < 1e-9
