import numpy as np
import pytest

from dpwnoids.errors import MonodromyLeakError
from dpwnoids.immersion import (
    AnnulusPatch,
    Surface,
    differential_at,
    mean_curvature_estimates,
    mesh,
    save_diagnostics,
    save_obj,
    _patch_faces,
)
from dpwnoids.loops import LoopMatrix, loop_exp
from dpwnoids.solver import MonodromyProblem
from dpwnoids.transport import PathSpec, end_loop
from dpwnoids.weierstrass import jorge_meeks


@pytest.fixture(scope="module")
def trinoid():
    return jorge_meeks(3, degree=8)


@pytest.fixture(scope="module")
def solved(trinoid):
    problem = MonodromyProblem(trinoid, degree=8)
    x1, _, _ = problem.newton_solve(1e-3, trinoid)
    return problem, x1


class TestPointEvaluation:
    def test_zero_time_collapses_to_origin(self, trinoid):
        surf = Surface.nnoid(0.0, trinoid)
        for z in (0.3, 0.2 - 0.3j, -0.4 + 0.1j):
            f, _ = surf.immerse(z)
            assert np.linalg.norm(f) < 1e-9

    def test_zero_time_differential_vanishes(self, trinoid):
        surf = Surface.nnoid(0.0, trinoid)
        d1, d2 = surf.differential_at(0.3 + 0.1j)
        assert np.linalg.norm(d1) == 0.0
        assert np.linalg.norm(d2) == 0.0

    def test_differential_matches_finite_differences(self, solved):
        problem, x1 = solved
        t = 1e-3
        surf = Surface.nnoid(t, x1, degree=8)
        z = 0.35 + 0.15j
        d1, di = surf.differential_at(z)
        h = 1e-4
        for direction, want in ((1.0, d1), (1.0j, di)):
            up, _ = surf.immerse(z + h * direction)
            dn, _ = surf.immerse(z - h * direction)
            fd = (up - dn) / (2 * h)
            assert np.max(np.abs(fd - want)) < 1e-6

    def test_conformality(self, solved):
        _, x1 = solved
        surf = Surface.nnoid(1e-3, x1, degree=8)
        z = 0.3 - 0.2j
        d1, di = surf.differential_at(z)
        _, nrm = surf.immerse(z)
        assert np.linalg.norm(d1) == pytest.approx(np.linalg.norm(di), rel=1e-6)
        assert abs(np.dot(d1, di)) < 1e-6 * np.dot(d1, d1)
        assert abs(np.dot(d1, nrm)) < 1e-8 * np.linalg.norm(d1)
        assert abs(np.dot(di, nrm)) < 1e-8 * np.linalg.norm(di)

    def test_regular_where_beta_nonzero(self, solved):
        _, x1 = solved
        t = 1e-3
        surf = Surface.nnoid(t, x1, degree=8)
        z = 0.4 + 0.2j
        assert abs(surf.potential.beta_zero(z)) > 0
        d1, _ = surf.differential_at(z)
        assert np.linalg.norm(d1) > 0

    def test_equivariance_under_constant_rotation(self, solved):
        _, x1 = solved
        t = 1e-3
        base = Surface.nnoid(t, x1, degree=8)
        rot = loop_exp(LoopMatrix.from_constant(
            np.array([[0.4j, 0.2 + 0.1j], [-0.2 + 0.1j, -0.4j]]), degree=8))
        moved = Surface(base.potential, rot @ base.phi0, base.z0)
        z = 0.25 + 0.3j
        f_base, _ = base.immerse(z)
        f_rot, _ = moved.immerse(z)
        h1 = rot.at(1.0)
        from dpwnoids.loops import su2_to_vec, vec_to_su2
        want = su2_to_vec(h1 @ vec_to_su2(f_base) @ np.linalg.inv(h1), check=False)
        assert np.max(np.abs(f_rot - want)) < 1e-9


class TestWellDefinedness:
    def test_solved_configuration_descends(self, solved):
        problem, x1 = solved
        surf = Surface.nnoid(1e-3, x1, degree=8)
        loops = [end_loop(x1, i, surf.z0) for i in range(2)]
        dev = surf.well_definedness(0.3 + 0.1j, loops)
        assert dev < 1e-7

    def test_unsolved_configuration_leaks(self, trinoid):
        surf = Surface.nnoid(5e-3, trinoid, degree=8)  # central data, t != 0
        loops = [end_loop(trinoid, 0, surf.z0)]
        with pytest.raises(MonodromyLeakError):
            surf.check_well_defined(0.3 + 0.1j, loops)


class TestDelaunaySurface:
    def test_rings_are_circles_of_revolution(self):
        surf = Surface.delaunay(0.05, degree=6)
        m = mesh(surf, [AnnulusPatch(r_in=0.7, r_out=1.4, rings=5, sectors=24)])
        ring = m.vertices[:24]
        center = ring.mean(axis=0)
        radii = np.linalg.norm(ring - center, axis=1)
        assert np.ptp(radii) < 1e-7

    def test_rotation_period_closes(self):
        surf = Surface.delaunay(0.05, degree=6)
        closure = surf.well_definedness(1.3, [PathSpec.circle(0.0, 1.0)])
        assert closure < 1e-5

    def test_mean_curvature_one(self):
        surf = Surface.delaunay(0.05, degree=6)
        m = mesh(surf, [AnnulusPatch(r_in=0.6, r_out=1.6, rings=18, sectors=48)])
        h = m.mean_curvature[m.interior]
        assert np.nanmedian(h) == pytest.approx(1.0, abs=5e-3)


class TestMeshPlumbing:
    def test_vertex_count_and_faces(self, solved):
        _, x1 = solved
        surf = Surface.nnoid(1e-3, x1, degree=8)
        patch = AnnulusPatch(center=0.0, r_in=0.15, r_out=0.35, rings=4, sectors=10)
        m = mesh(surf, [patch])
        assert m.vertex_count == 40
        assert len(m.faces) == 2 * 3 * 10
        assert m.ok.all()
        assert m.iwasawa_residual.max() < 1e-9

    def test_workers_agree_with_serial(self, solved):
        _, x1 = solved
        surf = Surface.nnoid(1e-3, x1, degree=8)
        patch = AnnulusPatch(center=0.0, r_in=0.2, r_out=0.3, rings=3, sectors=8)
        m1 = mesh(surf, [patch], workers=1)
        m2 = mesh(surf, [patch], workers=3)
        assert np.array_equal(m1.vertices, m2.vertices)

    def test_end_chart_patch(self, solved):
        _, x1 = solved
        surf = Surface.nnoid(1e-3, x1, degree=8)
        patch = AnnulusPatch(center=0.0, r_in=1e-4, r_out=1e-3, rings=4, sectors=8,
                             chart_end=0, name="end0")
        m = mesh(surf, [patch])
        assert m.ok.all()
        # samples sit next to the first end
        assert np.max(np.abs(m.z_samples - 1.0)) < 2e-3

    def test_save_obj_and_diagnostics(self, tmp_path, solved):
        _, x1 = solved
        surf = Surface.nnoid(1e-3, x1, degree=8)
        m = mesh(surf, [AnnulusPatch(r_in=0.2, r_out=0.3, rings=3, sectors=8)])
        obj = tmp_path / "out.obj"
        tsv = tmp_path / "out.tsv"
        save_obj(m, obj)
        save_diagnostics(m, tsv)
        lines = obj.read_text().splitlines()
        assert sum(1 for l in lines if l.startswith("v ")) == m.vertex_count
        assert sum(1 for l in lines if l.startswith("vn ")) == m.vertex_count
        assert sum(1 for l in lines if l.startswith("f ")) == len(m.faces)
        assert len(tsv.read_text().splitlines()) == m.vertex_count + 1


class TestCurvatureEstimator:
    def test_sphere_sign_convention(self):
        nu, nv = 40, 80
        u = np.linspace(0.5, np.pi - 0.5, nu)
        vv = 2 * np.pi * np.arange(nv) / nv
        uu, tt = np.meshgrid(u, vv, indexing="ij")
        verts = np.stack([np.sin(uu) * np.cos(tt), np.sin(uu) * np.sin(tt),
                          np.cos(uu)], -1).reshape(-1, 3)
        faces = np.asarray(_patch_faces(nu, nv, 0))
        inward = mean_curvature_estimates(verts, -verts, faces)
        outward = mean_curvature_estimates(verts, verts, faces)
        interior = np.ones(len(verts), bool)
        interior[:nv] = False
        interior[-nv:] = False
        assert np.nanmax(np.abs(inward[interior] - 1.0)) < 1e-3
        assert np.nanmax(np.abs(outward[interior] + 1.0)) < 1e-3

    def test_invalid_vertices_poison_neighbors_only(self):
        nu, nv = 8, 16
        u = np.linspace(0.5, np.pi - 0.5, nu)
        vv = 2 * np.pi * np.arange(nv) / nv
        uu, tt = np.meshgrid(u, vv, indexing="ij")
        verts = np.stack([np.sin(uu) * np.cos(tt), np.sin(uu) * np.sin(tt),
                          np.cos(uu)], -1).reshape(-1, 3)
        faces = np.asarray(_patch_faces(nu, nv, 0))
        valid = np.ones(len(verts), bool)
        valid[50] = False
        h = mean_curvature_estimates(verts, -verts, faces, valid=valid)
        assert np.isnan(h[50])
        # only the one-ring of the invalid vertex is poisoned
        poisoned = np.flatnonzero(np.isnan(h[2 * nv: 6 * nv])) + 2 * nv
        assert len(poisoned) <= 9
        assert not np.isnan(h[2 * nv + 8])  # same band, away from vertex 50
