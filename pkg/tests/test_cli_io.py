import json

import numpy as np
import pytest

from dpwnoids.artifacts import (
    RunArtifact,
    RunConfig,
    loop_from_json,
    loop_to_json,
    params_from_json,
    params_to_json,
)
from dpwnoids.cli import main
from dpwnoids.errors import ConfigError
from dpwnoids.loops import LaurentLoop, wiener_norm
from dpwnoids.solver import MonodromyProblem, SolutionStep, solve
from dpwnoids.weierstrass import jorge_meeks

RNG = np.random.RandomState(2718)


def small_config(tmp_path, t_values=("0x1.a36e2eb1c432dp-14",), truncation=6,
                 extra=None):
    doc = {
        "schema_version": 1,
        "family": {"builtin": "jorge_meeks", "n": 3, "scale": 1.0},
        "t_values": list(t_values),
        "truncation": truncation,
        "rho": "0x1.0p+1",
        "tolerances": {"ode_tol": "0x1.5798ee2308c3ap-37",
                       "solver_tol": "0x1.129ef8718c6bcp-30",
                       "quad_tol": "0x1.5798ee2308c3ap-37",
                       "iwasawa_tol": "0x1.b7cdfd9d7bdbbp-34"},
        "grid": {"core_rings": 3, "core_sectors": 10,
                 "end_rings": 3, "end_sectors": 8, "end_inner": 0.001},
        "workers": 1,
    }
    if extra:
        doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


class TestSerialization:
    def test_loop_roundtrip_exact(self):
        c = RNG.randn(9) + 1j * RNG.randn(9)
        loop = LaurentLoop(2.0, c)
        back = loop_from_json(loop_to_json(loop))
        assert np.array_equal(back.coeffs, loop.coeffs)
        assert back.rho == loop.rho

    def test_params_roundtrip_exact(self):
        x = jorge_meeks(3, degree=6)
        back = params_from_json(params_to_json(x))
        for a, b in zip(back.a + back.b + back.p, x.a + x.b + x.p):
            assert np.array_equal(a.coeffs, b.coeffs)
        assert back.frozen == x.frozen

    def test_config_roundtrip_lossless(self, tmp_path):
        path = small_config(tmp_path)
        cfg = RunConfig.load(path)
        cfg.save(tmp_path / "again.json")
        cfg2 = RunConfig.load(tmp_path / "again.json")
        assert cfg2 == cfg

    def test_config_rejects_bad_tolerance(self, tmp_path):
        path = small_config(tmp_path, extra={"tolerances": {"ode_tol": "-0x1.0p-10"}})
        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_config_rejects_missing_family(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema_version": 1, "family": {}}))
        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_artifact_roundtrip(self, tmp_path):
        x = jorge_meeks(3, degree=6)
        cfg = RunConfig(family={"builtin": "jorge_meeks", "n": 3}, truncation=6)
        step = SolutionStep(1e-4, x, 1e-12, 2, True, 2e-4)
        art = RunArtifact(cfg, (step,), provenance={"package_version": "0.1.0"})
        art.save(tmp_path / "a.json")
        back = RunArtifact.load(tmp_path / "a.json")
        assert back.steps[0].t == step.t
        assert back.steps[0].dt_after == step.dt_after
        assert np.array_equal(back.steps[0].x.a[0].coeffs, x.a[0].coeffs)


class TestCliValidate:
    def test_good_config_passes(self, tmp_path, capsys):
        path = small_config(tmp_path)
        assert main(["validate", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "nondegeneracy-rank" in out and "FAIL" not in out

    def test_duplicate_ends_fail(self, tmp_path, capsys):
        x = jorge_meeks(3, degree=4)
        doc = params_to_json(x)
        doc["p"][1] = doc["p"][0]  # duplicated end position
        path = small_config(tmp_path, extra={"family": {"params": doc}, "truncation": 4})
        assert main(["validate", "--config", str(path)]) == 1
        assert "parameter-construction FAIL" in capsys.readouterr().out

    def test_degenerate_rank_fails(self, tmp_path, capsys):
        # a gauss map of too-low degree passes construction only with b1 != 0;
        # degenerate data is built by zeroing the top coefficients of A and B
        x = jorge_meeks(3, degree=4)
        doc = params_to_json(x)
        # B = z^2: double root at 0 collides with A = z^2 scaling: A and B
        # share a root, which the validator reports as a construction failure
        doc["b"] = [doc["a"][0], loop_to_json(x.b[0]), loop_to_json(x.b[0])]
        path = small_config(tmp_path, extra={"family": {"params": doc}, "truncation": 4})
        assert main(["validate", "--config", str(path)]) == 1


class TestCliSolveMeshVerify:
    @pytest.fixture(scope="class")
    def solved_dir(self, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("cli")
        cfg = small_config(tmp, t_values=["0x1.a36e2eb1c432dp-14",
                                          "-0x1.a36e2eb1c432dp-14"])
        rc = main(["solve", "--config", str(cfg), "--out", str(tmp / "run")])
        assert rc == 0
        return tmp

    def test_artifact_written(self, solved_dir):
        art = RunArtifact.load(solved_dir / "run" / "artifact.json")
        assert len(art.targets()) == 2
        assert all(s.residual_norm <= 1e-9 for s in art.targets())

    def test_determinism_bit_identical(self, solved_dir):
        cfg = solved_dir / "config.json"
        rc = main(["solve", "--config", str(cfg), "--out", str(solved_dir / "run2")])
        assert rc == 0
        b1 = (solved_dir / "run" / "artifact.json").read_bytes()
        b2 = (solved_dir / "run2" / "artifact.json").read_bytes()
        assert b1 == b2

    def test_resume_agrees(self, solved_dir):
        # truncate the artifact to its first sign branch and resume the rest
        art = RunArtifact.load(solved_dir / "run" / "artifact.json")
        partial = RunArtifact(art.config,
                              tuple(s for s in art.steps if s.t >= 0),
                              art.provenance)
        partial.save(solved_dir / "partial.json")
        rc = main(["solve", "--config", str(solved_dir / "config.json"),
                   "--out", str(solved_dir / "resumed"),
                   "--resume", str(solved_dir / "partial.json")])
        assert rc == 0
        resumed = RunArtifact.load(solved_dir / "resumed" / "artifact.json")
        for s_new, s_old in zip(resumed.steps, art.steps):
            assert s_new.t == s_old.t
            for l_new, l_old in zip(s_new.x.free_loops(), s_old.x.free_loops()):
                assert np.max(np.abs(l_new.coeffs - l_old.coeffs)) <= 1e-12

    def test_mesh_command(self, solved_dir):
        rc = main(["mesh", "--artifact", str(solved_dir / "run" / "artifact.json"),
                   "--t", "0x1.a36e2eb1c432dp-14", "--out", str(solved_dir / "mesh")])
        assert rc == 0
        obj = (solved_dir / "mesh" / "surface.obj").read_text()
        assert obj.startswith("v ")
        tsv = (solved_dir / "mesh" / "surface_diagnostics.tsv").read_text()
        assert tsv.splitlines()[0].startswith("index\t")

    def test_verify_command(self, solved_dir, capsys):
        rc = main(["verify", "--artifact", str(solved_dir / "run" / "artifact.json")])
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "monodromy-unitary" in out

    def test_mesh_missing_artifact_io_error(self, solved_dir):
        rc = main(["mesh", "--artifact", str(solved_dir / "nosuch.json"),
                   "--t", "1e-4", "--out", str(solved_dir / "x")])
        assert rc == 3


class TestDelaunayFamily:
    def test_verify_axis(self, tmp_path, capsys):
        cfg = small_config(tmp_path, t_values=[],
                           extra={"family": {"builtin": "delaunay", "t": 0.05}})
        rc = main(["solve", "--config", str(cfg), "--out", str(tmp_path / "run")])
        assert rc == 0
        rc = main(["verify", "--artifact", str(tmp_path / "run" / "artifact.json")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "delaunay-axis-e1" in out and "PASS" in out
