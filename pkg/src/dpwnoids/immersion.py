"""Evaluation of the immersion on points and grids, and mesh production.

A Surface bundles a potential with its start frame at the base point.  Frames
at other points come from path transport followed by the unitary splitting;
the surface point and unit normal are read off the unitary factor at
lambda = 1.  Meshes are unions of polar patches (around the base point, and
around each end in a shifted chart so samples can crowd the puncture);
every vertex carries the diagnostics that make truncation and factorization
error visible: iwasawa residual, tail mass, and a discrete mean curvature.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import defaults
from .errors import DpwError, InvalidInputError, MonodromyLeakError
from .iwasawa import iwasawa, normal_point, sym_point
from .loops import LoopMatrix, plus_value
from .potential import (
    NnoidPotential,
    PotentialSpec,
    ShiftedPotential,
    initial_condition,
)
from .transport import PathSpec, integrate, route
from .weierstrass import NoidParams

__all__ = [
    "Surface",
    "SurfaceMesh",
    "AnnulusPatch",
    "frame_at",
    "immerse",
    "differential_at",
    "mesh",
    "mean_curvature_estimates",
    "save_obj",
    "save_diagnostics",
]


class Surface:
    """A solved configuration ready for pointwise evaluation."""

    def __init__(self, potential: PotentialSpec, phi0: LoopMatrix, z0,
                 ode_tol: float = defaults.ODE_TOL):
        self.potential = potential
        self.phi0 = phi0
        self.z0 = complex(z0)
        self.ode_tol = ode_tol

    @staticmethod
    def nnoid(t: float, x: NoidParams, degree: int | None = None, z0=None,
              ode_tol: float = defaults.ODE_TOL) -> "Surface":
        from .potential import default_basepoint

        if z0 is None:
            z0, _ = default_basepoint(x)
        pot = NnoidPotential(t, x, degree)
        phi0 = initial_condition(x, z0, degree=pot.degree)
        return Surface(pot, phi0, z0, ode_tol)

    @staticmethod
    def delaunay(t: float, degree: int = defaults.TRUNCATION,
                 ode_tol: float = defaults.ODE_TOL) -> "Surface":
        from .potential import DelaunayPotential

        pot = DelaunayPotential(t, degree=degree)
        return Surface(pot, LoopMatrix.identity(pot.rho, degree), 1.0, ode_tol)

    def route_clearance(self, z) -> float:
        """Detour distance for paths to z: geometry-scaled, endpoint-capped."""
        pts = np.asarray(self.potential.singular_points())
        if pts.size == 0:
            return defaults.PATH_CLEARANCE
        if pts.size >= 2:
            gaps = np.abs(pts[:, None] - pts[None, :]) + 1e18 * np.eye(len(pts))
            scale = float(np.min(gaps)) / 8.0
        else:
            scale = abs(self.z0 - pts[0]) / 4.0
        end_gap = min(float(np.min(np.abs(pts - self.z0))),
                      float(np.min(np.abs(pts - complex(z)))))
        return max(defaults.PATH_CLEARANCE, min(0.45 * scale, 0.9 * end_gap))

    def path_to(self, z) -> PathSpec:
        return route(self.z0, z, self.potential.singular_points(),
                     self.route_clearance(z))

    def transport(self, z=None, path: PathSpec | None = None) -> LoopMatrix:
        if path is None:
            if z is None:
                raise InvalidInputError("need a target point or a path")
            path = self.path_to(z)
        return integrate(self.potential, path, self.phi0, rtol=self.ode_tol)

    def frame_at(self, z=None, path: PathSpec | None = None):
        """(F, B) of the transported frame."""
        phi = self.transport(z, path)
        return iwasawa(phi)

    def immerse(self, z=None, path: PathSpec | None = None):
        """(surface point, unit normal) as real 3-vectors."""
        f, _ = self.frame_at(z, path)
        return sym_point(f).x, normal_point(f).x

    def differential_at(self, z, path: PathSpec | None = None):
        """df applied to dz = 1 and dz = i, via the factor formula."""
        f, b = self.frame_at(z, path)
        return differential_at(f, b, self.potential, z)

    def well_definedness(self, z, deck_paths) -> float:
        """Sup deviation of the point over deck transformations of the path.

        deck_paths are closed loops based at z0; the immersion is well
        defined when prepending them does not move the image point.
        """
        base_path = self.path_to(z)
        ref, _ = self.immerse(path=base_path)
        worst = 0.0
        for loop in deck_paths:
            combined = PathSpec(loop.segments + base_path.segments)
            val, _ = self.immerse(path=combined)
            worst = max(worst, float(np.max(np.abs(val - ref))))
        return worst

    def check_well_defined(self, z, deck_paths, tol: float = defaults.WELL_DEF_TOL):
        dev = self.well_definedness(z, deck_paths)
        if dev > tol:
            raise MonodromyLeakError(
                f"immersion moves by {dev:.3e} around a deck loop: "
                "monodromy problem not solved at this configuration")
        return dev


def frame_at(t: float, x: NoidParams, z, path: PathSpec | None = None):
    return Surface.nnoid(t, x).frame_at(z, path)


def immerse(t: float, x: NoidParams, z, path: PathSpec | None = None):
    return Surface.nnoid(t, x).immerse(z, path)


def differential_at(f: LoopMatrix, b: LoopMatrix, xi: PotentialSpec, z):
    """Tangent vectors df(1), df(i) from the frame and positive factor.

    df(u) = 2i mu^2 F(1) [[0, beta u], [conj(beta u), 0]] F(1)^{-1} with
    mu = B_11(z, 0) and beta the lambda^{-1} coefficient of the potential's
    (1,2) entry.
    """
    from .loops import su2_to_vec

    beta = xi.beta_zero(z)
    mu = plus_value(b.entry(0, 0), 0.0)
    f1 = f.at(1.0)
    f1_inv = np.linalg.inv(f1)
    out = []
    for u in (1.0, 1.0j):
        core = np.array([[0.0, beta * u], [np.conj(beta * u), 0.0]])
        mat = 2j * mu ** 2 * (f1 @ core @ f1_inv)
        out.append(su2_to_vec(mat, check=False))
    return out[0], out[1]


# -- meshes -------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusPatch:
    """Polar grid between two radii; geometric ring spacing by default.

    With chart_end set, the patch sits in the shifted chart of that end and
    center is relative to the central end position (normally 0).
    """

    center: complex = 0.0 + 0.0j
    r_in: float = 0.1
    r_out: float = 1.0
    rings: int = 16
    sectors: int = 48
    chart_end: int | None = None
    name: str = "patch"

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_out, self.r_in, self.rings)


@dataclass
class SurfaceMesh:
    vertices: np.ndarray          # (V, 3)
    normals: np.ndarray           # (V, 3)
    faces: np.ndarray             # (F, 3) int
    z_samples: np.ndarray         # (V,) complex, absolute coordinates
    mean_curvature: np.ndarray    # (V,) float, nan where not estimated
    iwasawa_residual: np.ndarray  # (V,)
    tail_mass: np.ndarray         # (V,)
    ok: np.ndarray                # (V,) bool
    interior: np.ndarray          # (V,) bool
    patch_of: np.ndarray          # (V,) int
    patch_names: tuple = ()

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


def _patch_faces(rings, sectors, offset):
    faces = []
    for i in range(rings - 1):
        for j in range(sectors):
            v00 = offset + i * sectors + j
            v01 = offset + i * sectors + (j + 1) % sectors
            v10 = offset + (i + 1) * sectors + j
            v11 = offset + (i + 1) * sectors + (j + 1) % sectors
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return faces


def _eval_vertex(phi):
    f, b = iwasawa(phi)
    pt = sym_point(f, check=False).x
    nm = normal_point(f, check=False).x
    res = 0.0
    for lam in (1.0, 1j, -1.0, -1j):
        res = max(res, float(np.max(np.abs(phi.at(lam) - f.at(lam) @ b.at(lam)))))
    return pt, nm, res, phi.tail + f.tail


def mesh(surface: Surface, patches, workers: int = 1) -> SurfaceMesh:
    """Sample the immersion on polar patches and triangulate them.

    Transport runs along a spine (outer ring entry, then radially inward)
    and then around each ring; rings are independent once the spine is done,
    so they can be evaluated by a small worker pool.
    """
    all_vertices, all_normals, all_faces = [], [], []
    all_z, all_h, all_res, all_tail, all_ok, all_int, all_patch = [], [], [], [], [], [], []
    offset = 0
    names = []
    for p_idx, patch in enumerate(patches):
        names.append(patch.name)
        pot = surface.potential
        center_abs = patch.center
        if patch.chart_end is not None:
            if not isinstance(pot, NnoidPotential):
                raise InvalidInputError("end charts need an n-noid potential")
            chart = ShiftedPotential(pot, patch.chart_end)
            center_abs = patch.center + pot._ends[patch.chart_end]
        else:
            chart = pot
        radii = patch.radii()
        thetas = 2 * np.pi * np.arange(patch.sectors) / patch.sectors
        local = patch.center + radii[:, None] * np.exp(1j * thetas[None, :])
        entry_abs = center_abs + radii[0] * np.exp(1j * thetas[0])

        # spine: base point -> outer entry (absolute coordinates), then inward
        phi_entry = surface.transport(entry_abs)
        spine = [phi_entry]
        for i in range(1, patch.rings):
            seg = PathSpec.line(local[i - 1, 0], local[i, 0])
            spine.append(integrate(chart, seg, spine[-1], rtol=surface.ode_tol,
                                   check_clearance=False))

        v = np.zeros((patch.rings * patch.sectors, 3))
        nrm = np.zeros_like(v)
        res = np.zeros(len(v))
        tail = np.zeros(len(v))
        okay = np.ones(len(v), dtype=bool)

        def do_ring(i):
            phi = spine[i]
            for j in range(patch.sectors):
                idx = i * patch.sectors + j
                try:
                    if j > 0:
                        arc = PathSpec((("arc", patch.center, radii[i],
                                         thetas[j - 1], thetas[j]),))
                        phi = integrate(chart, arc, phi, rtol=surface.ode_tol,
                                        check_clearance=False)
                    v[idx], nrm[idx], res[idx], tail[idx] = _eval_vertex(phi)
                except DpwError:
                    okay[idx:(i + 1) * patch.sectors] = False
                    break

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(do_ring, range(patch.rings)))
        else:
            for i in range(patch.rings):
                do_ring(i)

        interior = np.ones(len(v), dtype=bool)
        interior[:patch.sectors] = False
        interior[-patch.sectors:] = False

        all_vertices.append(v)
        all_normals.append(nrm)
        all_faces.extend(_patch_faces(patch.rings, patch.sectors, offset))
        all_z.append((local + (center_abs - patch.center)).reshape(-1))
        all_res.append(res)
        all_tail.append(tail)
        all_ok.append(okay)
        all_int.append(interior)
        all_patch.append(np.full(len(v), p_idx))
        offset += len(v)

    vertices = np.concatenate(all_vertices)
    normals = np.concatenate(all_normals)
    faces = np.asarray(all_faces, dtype=int)
    ok = np.concatenate(all_ok)
    interior = np.concatenate(all_int) & ok
    h = mean_curvature_estimates(vertices, normals, faces, valid=ok)
    return SurfaceMesh(vertices, normals, faces, np.concatenate(all_z), h,
                       np.concatenate(all_res), np.concatenate(all_tail),
                       ok, interior, np.concatenate(all_patch), tuple(names))


def mean_curvature_estimates(vertices, normals, faces, valid=None) -> np.ndarray:
    """Cotangent-Laplacian mean curvature with mixed (Voronoi-safe) areas.

    H is measured against the supplied normal field, with the sign fixed so
    that a normal pointing to the mean-convex side gives H = +1 (the unit
    sphere with inward normals).  The frames produced here orient their
    normals that way, so CMC-1 meshes report +1.  Vertices touching an
    invalid vertex get nan.
    """
    v = np.asarray(vertices, dtype=float)
    nv = len(v)
    lap = np.zeros_like(v)
    area = np.zeros(nv)
    touched_bad = np.zeros(nv, dtype=bool)
    if valid is None:
        valid = np.ones(nv, dtype=bool)

    bad_face = ~valid[faces].all(axis=1)
    for corner in range(3):
        i = faces[:, corner]
        j = faces[:, (corner + 1) % 3]
        k = faces[:, (corner + 2) % 3]
        e_ij = v[j] - v[i]
        e_ik = v[k] - v[i]
        cross_norm = np.linalg.norm(np.cross(e_ij, e_ik), axis=1)
        cross_norm = np.where(cross_norm < 1e-300, 1e-300, cross_norm)
        cot_i = np.einsum("fi,fi->f", e_ij, e_ik) / cross_norm
        # cot at corner i weights the opposite edge (j, k)
        w = 0.5 * cot_i
        np.add.at(lap, j, w[:, None] * (v[k] - v[j]))
        np.add.at(lap, k, w[:, None] * (v[j] - v[k]))
        np.logical_or.at(touched_bad, i, bad_face)

    # mixed areas (second pass, Voronoi with obtuse fallback)
    e0 = v[faces[:, 1]] - v[faces[:, 0]]
    e1 = v[faces[:, 2]] - v[faces[:, 1]]
    e2 = v[faces[:, 0]] - v[faces[:, 2]]
    full = 0.5 * np.linalg.norm(np.cross(e0, -e2), axis=1)
    cots = np.zeros((len(faces), 3))
    for corner, (a, b) in enumerate(((e0, -e2), (e1, -e0), (e2, -e1))):
        cr = np.linalg.norm(np.cross(a, b), axis=1)
        cr = np.where(cr < 1e-300, 1e-300, cr)
        cots[:, corner] = np.einsum("fi,fi->f", a, b) / cr
    obtuse = cots < 0.0
    any_obtuse = obtuse.any(axis=1)
    lens2 = np.stack([np.einsum("fi,fi->f", e1, e1),
                      np.einsum("fi,fi->f", e2, e2),
                      np.einsum("fi,fi->f", e0, e0)], axis=1)  # opposite edges
    for corner in range(3):
        i = faces[:, corner]
        voronoi = (lens2[:, (corner + 1) % 3] * cots[:, (corner + 1) % 3]
                   + lens2[:, (corner + 2) % 3] * cots[:, (corner + 2) % 3]) / 8.0
        amix = np.where(any_obtuse,
                        np.where(obtuse[:, corner], full / 2.0, full / 4.0),
                        voronoi)
        np.add.at(area, i, amix)

    h = np.full(nv, np.nan)
    good = (area > 1e-300) & valid & ~touched_bad
    hvec = np.zeros_like(v)
    hvec[good] = lap[good] / (2.0 * area[good][:, None])
    # mean curvature vector = (laplacian of position)/2, paired with the normal
    h[good] = np.einsum("vi,vi->v", hvec[good], np.asarray(normals)[good])
    return h


def save_obj(m: SurfaceMesh, path):
    """v/vn/f records; faces reference vertex and normal with the same index."""
    with open(path, "w") as fh:
        for p in m.vertices:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for n in m.normals:
            fh.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
        for f in m.faces:
            if m.ok[f].all():
                fh.write(f"f {f[0]+1}//{f[0]+1} {f[1]+1}//{f[1]+1} {f[2]+1}//{f[2]+1}\n")


def save_diagnostics(m: SurfaceMesh, path):
    """One row per vertex: sample point, residuals, curvature estimate."""
    with open(path, "w") as fh:
        fh.write("index\tz_re\tz_im\tx\ty\tz\tH\tiwasawa_residual\ttail_mass\tok\n")
        for i in range(m.vertex_count):
            fh.write(f"{i}\t{m.z_samples[i].real:.17g}\t{m.z_samples[i].imag:.17g}\t"
                     f"{m.vertices[i][0]:.17g}\t{m.vertices[i][1]:.17g}\t"
                     f"{m.vertices[i][2]:.17g}\t{m.mean_curvature[i]:.10g}\t"
                     f"{m.iwasawa_residual[i]:.3e}\t{m.tail_mass[i]:.3e}\t"
                     f"{int(m.ok[i])}\n")
