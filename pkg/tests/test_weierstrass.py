import numpy as np
import pytest

from dpwnoids.errors import InvalidInputError, PoleError
from dpwnoids.loops import loop_from_coeffs, constant_loop
from dpwnoids.weierstrass import (
    ConstantParams,
    NoidParams,
    eval_g,
    eval_omega,
    gauss_direction,
    jorge_meeks,
    nondegeneracy_rank,
    period_contour_radius,
    periods,
)


@pytest.fixture(scope="module")
def trinoid():
    return jorge_meeks(3, degree=8)


class TestEvaluation:
    def test_catenoid_limit_gauss_map(self):
        # g = (1+z)/(1-z): A = z + 1, B = -z + 1 (coefficients high power first)
        cp = ConstantParams(a=[0.0, 1.0, 1.0], b=[0.0, -1.0, 1.0],
                            p=[3.0, 3.0 + 4j, -2.0])  # ends irrelevant here
        assert eval_g(cp, 0.0) == pytest.approx(1.0)
        assert eval_g(cp, 2.0) == pytest.approx(-3.0)

    def test_omega_value(self):
        # B = sqrt(2)(z-1) over ends near 0, 4, 5:
        # omega = 2 (z-1)^2 / ((z-1e-9)^2 (z-4)^2 (z-5)^2)
        cp = ConstantParams(a=[0, 0, 1.0], b=[0, np.sqrt(2), -np.sqrt(2)],
                            p=[1e-9, 4.0, 5.0])
        z = 2.0
        got = eval_omega(cp, z)
        assert got == pytest.approx(2 * (z - 1) ** 2 / (z ** 2 * (z - 4) ** 2 * (z - 5) ** 2))

    def test_identical_polynomials_give_unit_gauss_map(self):
        cp = ConstantParams(a=[2.0, 1.0, 3.0], b=[2.0, 1.0, 3.0], p=[0.0, 1.0, 2.0])
        for z in (0.3 + 0.1j, -2.0, 5.0j):
            assert eval_g(cp, z) == pytest.approx(1.0)

    def test_pole_errors(self):
        cp = ConstantParams(a=[1.0, 0, 0], b=[0, 0, 1.0], p=[1.0, -1.0, 1j])
        with pytest.raises(PoleError):
            eval_omega(cp, 1.0)
        cp2 = ConstantParams(a=[1.0, 0, 0], b=[1.0, 0, 1.0], p=[3.0, -3.0, 3j])
        root = np.roots([1.0, 0, 1.0])[0]
        with pytest.raises(PoleError):
            eval_g(cp2, root)


class TestPeriods:
    def test_catenoid_flux_anchor(self):
        # data of the horizontal catenoid family: g=(1+z)/(1-z) with
        # omega = 2((z-1)/z)^2 dz; flux at the end z=0 must be (8 pi, 0, 0).
        # Laurent residues: Res omega = -4, Res g omega = 0, Res g^2 omega = 4.
        s2 = np.sqrt(2)
        cp = ConstantParams(a=[0, s2, s2], b=[0, -s2, s2], p=[0.0, 40.0, -40.0])
        eps = 0.25  # small contour around 0 only; far ends are parked away

        from dpwnoids.weierstrass import contour_integrals

        def integrand(z):
            av, bv = cp.A(z), cp.B(z)
            prod = cp.end_product(z)
            return np.stack([bv * bv, av * bv, av * av]) / prod

        est, err, _ = contour_integrals(integrand, 0.0, eps)
        res = 2j * np.pi * est
        # the parked double poles multiply omega by h(z) = ((z-40)(z+40))^-2
        # with h'(0) = 0, so the residues are exactly h(0) (-4, 0, 4)
        want = 2j * np.pi * np.array([-4.0, 0.0, 4.0])
        scale = 40.0 ** -4
        assert np.allclose(res / scale, want, atol=1e-6)

    def test_period_sum_identity(self):
        rng = np.random.RandomState(8)
        base = jorge_meeks(3, degree=8)
        cp0 = base.central()
        for _ in range(5):
            cp = ConstantParams(cp0.a + 0.05 * (rng.randn(3) + 1j * rng.randn(3)),
                                cp0.b + 0.05 * (rng.randn(3) + 1j * rng.randn(3)),
                                cp0.p)
            table = periods(cp)
            assert np.max(np.abs(table.P_all.sum(axis=0))) < 1e-9

    def test_contour_independence(self, trinoid):
        t3 = periods(trinoid.central(), radius_factor=3.0)
        t5 = periods(trinoid.central(), radius_factor=5.0)
        assert np.max(np.abs(t3.P - t5.P)) < 1e-11

    def test_doubling_converged(self, trinoid):
        table = periods(trinoid.central())
        assert table.quad_error < 1e-11


class TestJorgeMeeks:
    def test_trinoid_periods_close(self, trinoid):
        table = periods(trinoid.central())
        assert np.max(np.abs(table.Q.real)) < 1e-10

    def test_ends_are_roots_of_unity(self, trinoid):
        want = np.exp(2j * np.pi * np.arange(3) / 3)
        got = np.array([l.coeff(0) for l in trinoid.p])
        assert np.allclose(got, want, atol=0)

    def test_flux_sums_to_zero(self, trinoid):
        table = periods(trinoid.central())
        assert np.max(np.abs(table.flux.sum(axis=0))) < 1e-9

    def test_flux_matches_gauss_direction(self, trinoid):
        cp = trinoid.central()
        table = periods(cp)
        for i in range(3):
            n0 = gauss_direction(cp.g(cp.p[i]))
            tau = table.necksizes[i]
            assert tau > 0
            diff_plus = np.linalg.norm(table.flux[i] - 2 * np.pi * tau * n0)
            diff_minus = np.linalg.norm(table.flux[i] + 2 * np.pi * tau * n0)
            assert min(diff_plus, diff_minus) < 1e-9

    def test_symmetric_necksizes_equal(self, trinoid):
        table = periods(trinoid.central())
        assert np.ptp(table.necksizes) < 1e-9

    def test_gauss_scale_is_unity(self, trinoid):
        # the classical most-symmetric trinoid has g exactly z^(n-1)
        assert trinoid.a[0].coeff(0) == pytest.approx(1.0, abs=1e-10)

    def test_eps_scale(self, trinoid):
        assert period_contour_radius(trinoid.central()) == pytest.approx(np.sqrt(3) / 8)


class TestNonDegeneracy:
    def test_trinoid_rank_full(self, trinoid):
        rank, sv = nondegeneracy_rank(trinoid)
        assert rank == 6
        assert sv[5] > 1e-6 * sv[0]

    def test_rank_invariant_under_common_phase(self, trinoid):
        phase = np.exp(0.7j)
        cp = trinoid.central()
        cp2 = ConstantParams(cp.a, cp.b * phase, cp.p)
        rank, _ = nondegeneracy_rank(NoidParams.from_constants(cp2.a, cp2.b, cp2.p, degree=8))
        assert rank == 6

    def test_duplicate_ends_rejected(self):
        with pytest.raises(InvalidInputError):
            NoidParams.from_constants([1, 0, 0], [0, 0, 1], [1.0, 1.0, -1.0], degree=4)

    def test_degenerate_gauss_map_rejected(self):
        with pytest.raises(InvalidInputError):
            ConstantParams([0, 0, 1.0], [0, 0, 1.0], [1.0, -1.0, 1j]).validate()


class TestParamPlumbing:
    def test_free_index_count(self, trinoid):
        assert len(trinoid.free_indices()) == 6

    def test_replace_free_roundtrip(self, trinoid):
        loops = trinoid.free_loops()
        again = trinoid.replace_free(loops)
        for l1, l2 in zip(again.free_loops(), loops):
            assert np.array_equal(l1.coeffs, l2.coeffs)

    def test_sample_grid_matches_pointwise(self, trinoid):
        lam = np.exp(2j * np.pi * np.arange(5) / 5)
        snaps = trinoid.sample_grid(lam)
        for j, l in enumerate(lam):
            cp = trinoid.at_lambda(l)
            assert np.allclose(snaps[j].a, cp.a)
            assert np.allclose(snaps[j].p, cp.p)

    def test_frozen_parameters_never_move(self, trinoid):
        perturbed = [l + constant_loop(0.1, degree=l.degree) for l in trinoid.free_loops()]
        moved = trinoid.replace_free(perturbed)
        for i in trinoid.frozen:
            assert np.array_equal(moved.p[i].coeffs, trinoid.p[i].coeffs)

    def test_loop_valued_params(self):
        base = jorge_meeks(3, degree=6)
        a0 = base.a[0] + loop_from_coeffs({1: 0.01}, degree=6)
        perturbed = NoidParams(3, (a0,) + base.a[1:], base.b, base.p)
        cp = perturbed.at_lambda(0.5)
        assert cp.a[0] == pytest.approx(1.0 + 0.005, abs=1e-9)
