import numpy as np
import pytest

from dpwnoids.errors import GaugeError, InvalidBasepointError, InvalidInputError, PoleError
from dpwnoids.loops import LoopMatrix, grid_points, loop_sqrt, monomial, constant_loop, wiener_norm
from dpwnoids.potential import (
    ConstantGauge,
    DelaunayPotential,
    EndGauge,
    GaugedPotential,
    MoebiusGauge,
    NnoidPotential,
    RegularityGauge,
    ShiftedPotential,
    SqrtBranch,
    default_basepoint,
    end_gauge,
    gauge_apply,
    initial_condition,
    regularity_gauge,
    rs_derivative,
    rs_solve,
    xi_delaunay,
    xi_nnoid,
)
from dpwnoids.weierstrass import NoidParams, jorge_meeks


@pytest.fixture(scope="module")
def trinoid():
    return jorge_meeks(3, degree=8)


def sup_on_circle(mat_a, mat_b, samples=24):
    lams = np.exp(2j * np.pi * np.arange(samples) / samples)
    return max(np.max(np.abs(mat_a.at(l) - mat_b.at(l))) for l in lams)


class TestNnoidPotential:
    def test_zero_time_is_lower_triangular(self, trinoid):
        xi = xi_nnoid(0.0, trinoid, 0.3 + 0.2j)
        assert wiener_norm(xi.entry(0, 0)) == 0
        assert wiener_norm(xi.entry(0, 1)) == 0
        assert wiener_norm(xi.entry(1, 1)) == 0
        cp = trinoid.central()
        assert xi.entry(1, 0).coeff(0) == pytest.approx(complex(cp.dg(0.3 + 0.2j)), rel=1e-12)

    def test_upper_entry_vanishes_at_lambda_one(self, trinoid):
        xi = xi_nnoid(0.02, trinoid, 0.4)
        assert abs(xi.entry(0, 1)(1.0)) < 1e-13

    def test_time_derivative_of_minus_one_coefficient(self, trinoid):
        # d/dt of the lambda^{-1} coefficient of entry (1,2) at t=0 is omega/4
        z = 0.25 + 0.1j
        h = 1e-5
        up = xi_nnoid(h, trinoid, z).entry(0, 1).coeff(-1)
        dn = xi_nnoid(-h, trinoid, z).entry(0, 1).coeff(-1)
        deriv = (up - dn) / (2 * h)
        cp = trinoid.central()
        assert deriv == pytest.approx(complex(cp.omega(z)) / 4.0, rel=1e-9)

    def test_traceless_and_shape(self, trinoid):
        pot = NnoidPotential(0.01, trinoid)
        xi = pot.matrix_at(0.2 - 0.3j)
        assert xi.is_traceless()
        n = xi.degree
        assert np.max(np.abs(xi.array[0, 1, : n - 1])) == 0.0  # min power -1
        assert np.max(np.abs(xi.array[1, 0, :n])) == 0.0       # min power 0

    def test_pole_guard(self, trinoid):
        pot = NnoidPotential(0.01, trinoid)
        with pytest.raises(PoleError) as err:
            pot.matrix_at(1.0)
        assert err.value.kind == "end"

    def test_beta_zero_matches_coefficient(self, trinoid):
        pot = NnoidPotential(0.02, trinoid)
        z = 0.3 + 0.1j
        arr, _ = pot.coeff_array_at(z)
        assert pot.beta_zero(z) == pytest.approx(complex(arr[0, 1, pot.degree - 1]))

    def test_shifted_chart_matches_absolute(self, trinoid):
        pot = NnoidPotential(0.01, trinoid)
        shifted = ShiftedPotential(pot, 0)
        zeta = 0.4 * np.exp(0.3j)
        p0 = trinoid.central().p[0]
        direct = pot.matrix_at(p0 + zeta)
        chart = shifted.matrix_at(zeta)
        assert sup_on_circle(direct, chart) < 1e-12


class TestInitialCondition:
    def test_determinant_one(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        one = constant_loop(1.0, degree=phi0.degree)
        assert wiener_norm(phi0.det() - one) < 1e-12

    def test_constant_at_central_value(self, trinoid):
        phi0 = initial_condition(trinoid, 0.0)
        n = phi0.degree
        off_zero = np.array(phi0.array)
        off_zero[:, :, n] = 0
        assert np.max(np.abs(off_zero)) < 1e-14

    def test_matches_gauss_map_value(self, trinoid):
        z0 = 0.2 + 0.1j
        phi0 = initial_condition(trinoid, z0)
        cp = trinoid.central()
        want = np.array([[cp.g(z0), 1.0], [-1.0, 0.0]])
        assert np.max(np.abs(phi0.at(1.0) - want)) < 1e-12

    def test_pole_rejected(self, trinoid):
        with pytest.raises(InvalidBasepointError):
            initial_condition(trinoid, 1.0)

    def test_default_basepoint(self, trinoid):
        z0, fallback = default_basepoint(trinoid)
        assert z0 == 0.0
        assert fallback is False


class TestGauging:
    def test_identity_gauge_is_identity_action(self, trinoid):
        pot = NnoidPotential(0.01, trinoid)
        gauged = gauge_apply(pot, ConstantGauge(np.eye(2), degree=pot.degree))
        z = 0.35 + 0.2j
        assert sup_on_circle(pot.matrix_at(z), gauged.matrix_at(z)) < 1e-12

    def test_regularity_gauge_closed_form(self, trinoid):
        # gauged potential must be [[0, mu g^2 omega], [dg/g^2, 0]]
        pot = NnoidPotential(0.02, trinoid)
        gauged = gauge_apply(pot, RegularityGauge(trinoid))
        z = 0.45 + 0.25j
        cp = trinoid.central()
        got = gauged.matrix_at(z)
        g, om, dg = cp.g(z), cp.omega(z), cp.dg(z)
        lam = np.exp(0.4j)
        mu = 0.25 * 0.02 * (lam - 1) ** 2 / lam
        want = np.array([[0, mu * g ** 2 * om], [dg / g ** 2, 0]])
        assert np.max(np.abs(got.at(lam) - want)) < 1e-11

    def test_gauge_then_ungauge_roundtrip(self, trinoid):
        pot = NnoidPotential(0.015, trinoid)
        g = RegularityGauge(trinoid)
        back = gauge_apply(gauge_apply(pot, g), g.inverse())
        z = 0.3 - 0.4j
        assert sup_on_circle(pot.matrix_at(z), back.matrix_at(z)) < 1e-11

    def test_right_action_property(self, trinoid):
        pot = NnoidPotential(0.015, trinoid)
        g1 = RegularityGauge(trinoid)
        h = np.array([[1.0, 0.3], [0.0, 1.0]])
        g2 = ConstantGauge(h, degree=g1.degree)
        z = 0.5 + 0.3j
        once = gauge_apply(pot, g1.compose(g2)).matrix_at(z)
        twice = gauge_apply(gauge_apply(pot, g1), g2).matrix_at(z)
        assert sup_on_circle(once, twice) < 1e-10

    def test_regularity_gauge_determinant(self, trinoid):
        g = regularity_gauge(trinoid, 0.4 + 0.2j)
        one = constant_loop(1.0, degree=g.degree)
        assert wiener_norm(g.det() - one) < 1e-10

    def test_gauged_potential_finite_at_gauge_zero(self):
        # data with interior B-roots at +-1/2, where the raw potential blows up
        a = [0.0, 0.0, 1.0]
        b = [1.0, 0.0, -0.25]
        p = [1.0, np.exp(2j * np.pi / 3), np.exp(-2j * np.pi / 3)]
        x = NoidParams.from_constants(a, b, p, degree=6)
        pot = NnoidPotential(0.01, x)
        gauged = gauge_apply(pot, RegularityGauge(x))
        root = 0.5
        got = gauged.matrix_at(root + 1e-7)  # essentially on the former pole
        assert np.isfinite(got.array).all()
        # the rescaled upper-right coefficient stays away from zero there
        assert abs(got.entry(0, 1).coeff(-1)) > 1e-6

    def test_moebius_gauge_normalization(self):
        g = MoebiusGauge(0.3 - 0.1j, 0.8, degree=4)
        eye = LoopMatrix.identity(degree=4)
        assert sup_on_circle(g.matrix_at(0.0), eye) < 1e-14
        fd = (g.sample_at(1e-6, grid_points(g.grid)) -
              g.sample_at(-1e-6, grid_points(g.grid))) / 2e-6
        an = g.d_sample_at(0.0, grid_points(g.grid))
        assert np.max(np.abs(fd - an)) < 1e-7


class TestDelaunay:
    def test_rs_limit_at_zero(self):
        r, s, kind = rs_solve(0.0)
        assert (r, s) == (0.0, 0.5)
        assert kind == "interior"

    def test_rs_boundary_flag(self):
        r, s, kind = rs_solve(1.0 / 16.0)
        assert r == s == 0.25
        assert kind == "boundary"

    def test_rs_roundtrip_random(self):
        rng = np.random.RandomState(4)
        for u in rng.rand(50) / 16.0:
            r, s, _ = rs_solve(u)
            assert r + s == pytest.approx(0.5, abs=1e-14)
            assert r * s == pytest.approx(u, abs=1e-14)
            assert r < s

    def test_rs_no_real_solution(self):
        with pytest.raises(InvalidInputError):
            rs_solve(0.2)

    def test_rs_derivative(self):
        u = 0.01
        h = 1e-7
        dr, ds = rs_derivative(u)
        r1, s1, _ = rs_solve(u + h)
        r0, s0, _ = rs_solve(u - h)
        assert dr == pytest.approx((r1 - r0) / (2 * h), rel=1e-6)
        assert ds == pytest.approx((s1 - s0) / (2 * h), rel=1e-6)

    def test_potential_values(self):
        t = 0.01
        r, s, _ = rs_solve(t)
        xi = xi_delaunay(t, 2.0, degree=4)
        lam = np.exp(0.9j)
        want = np.array([[0, (r / lam + s)], [r * lam + s, 0]]) / 2.0
        assert np.max(np.abs(xi.at(lam) - want)) < 1e-14

    def test_residue_matrix(self):
        pot = DelaunayPotential(0.01, degree=4)
        res = pot.residue()
        assert res.entry(0, 1).coeff(-1) == pytest.approx(pot.r)
        assert res.entry(1, 0).coeff(1) == pytest.approx(pot.r)
        assert res.entry(0, 1).coeff(0) == pytest.approx(pot.s)


class TestEndGauge:
    def test_determinant_one(self):
        t_alpha = 0.002
        r, s, _ = rs_solve(t_alpha)
        k = loop_sqrt(monomial(1, r, degree=8) + constant_loop(s, degree=8))
        g = end_gauge(0.3 + 0.1j, k)
        one = constant_loop(1.0, degree=g.degree)
        assert wiener_norm(g.det() - one) < 1e-10

    def test_k_at_zero_time(self):
        r, s, _ = rs_solve(0.0)
        k = loop_sqrt(monomial(1, r, degree=8) + constant_loop(s, degree=8))
        # k = sqrt(s) = 1/sqrt(2), constant in lambda
        assert k.coeff(0) == pytest.approx(1 / np.sqrt(2))
        assert wiener_norm(k - constant_loop(1 / np.sqrt(2), degree=8)) < 1e-14

    def test_branch_stays_off_path(self):
        branch = SqrtBranch.avoiding([0.0, np.pi / 2])  # path directions
        vals = [branch(np.exp(1j * a)) for a in np.linspace(0, np.pi / 2, 20)]
        diffs = np.abs(np.diff(vals))
        assert np.max(diffs) < 0.1  # continuous along the used sector

    def test_delaunay_normal_form_of_gauged_residue(self, trinoid):
        # with k = sqrt(r lambda + s), the gauged simple-pole residue becomes
        # [[0, r/lambda + s], [r lambda + s, 0]] (checked via the scalar identity)
        t_alpha = 0.003
        r, s, _ = rs_solve(t_alpha)
        lam = np.exp(2j * np.pi * np.arange(16) / 16)
        lhs = (r / lam + s) * (r * lam + s)
        rhs = 0.25 + 0.25 * t_alpha * 4 * (lam - 1) ** 2 / lam
        assert np.max(np.abs(lhs - rhs)) < 1e-14  # (r/l+s)(rl+s) = 1/4 + rs (l-1)^2/l


class TestGaugeErrors:
    def test_regularity_gauge_rejects_gauss_zero(self, trinoid):
        g = RegularityGauge(trinoid)
        with pytest.raises(GaugeError):
            g.sample_at(0.0, grid_points(g.grid))  # g = z^2 vanishes at 0

    def test_end_gauge_rejects_origin(self):
        g = EndGauge(1.0, degree=4)
        with pytest.raises(GaugeError):
            g.sample_at(0.0, grid_points(g.grid))
