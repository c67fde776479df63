import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from chaoscover.cli import main
from chaoscover.config import ConfigError, ExperimentConfig
from chaoscover.svg import PointFileError, SvgStyle, emit_svg_points, read_points

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run_cli(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def files(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir()) if p.name != "manifest.json"}


class TestTable1:
    def test_values(self, tmp_path):
        assert run_cli(tmp_path, "--experiment", "table1") == 0
        rows = (tmp_path / "table1.csv").read_text().splitlines()
        assert rows[0].startswith("carpet,")
        body = [r.split(",") for r in rows[1:]]
        got = {r[0]: r[5:9] for r in body}
        assert got["row1"] == ["1.95286", "--", "2.00000", "1.83404"]
        assert got["row2"] == ["1.58496", "1.58089", "1.63093", "1.36907"]
        assert got["row3"] == ["1.75260", "--", "1.68261", "1.56932"]
        assert all("config=" in r[-1] for r in body)

    def test_manifest(self, tmp_path):
        run_cli(tmp_path, "--experiment", "table1", "--seed", "9")
        m = json.loads((tmp_path / "manifest.json").read_text())
        assert m["seed"] == 9 and "numpy" in m["versions"] and m["wall_time_s"] >= 0
        assert set(m["artifacts"]) == {"table1.csv", "table1.jsonl"}
        for line in (tmp_path / "table1.jsonl").read_text().splitlines():
            assert json.loads(line)["config_hash"] == m["config_hash"]


class TestOptimize:
    def test_nonunique(self, tmp_path):
        assert main(["--config", str(CONFIGS / "optimize_nonunique.toml"), "--out", str(tmp_path)]) == 0
        rec = json.loads((tmp_path / "optimize.jsonl").read_text())
        assert rec["regime"] == "QK" and rec["K"] == 1
        np.testing.assert_allclose(rec["q_star"], [0.5, 0.5])
        assert rec["alpha"] == pytest.approx(2.0, abs=1e-12)


class TestOrbit:
    def test_orbit_artifacts(self, tmp_path):
        assert main(["--config", str(CONFIGS / "orbit.toml"), "--out", str(tmp_path)]) == 0
        recs = [json.loads(l) for l in (tmp_path / "orbit.jsonl").read_text().splitlines()]
        assert len(recs) == 3
        assert recs[0]["squares_visited"] == recs[0]["squares"]
        assert len({r["steps"] for r in recs}) == 1
        for k in range(3):
            svg = (tmp_path / f"orbit_{k}.svg").read_text()
            n_pts = len((tmp_path / f"orbit_{k}.csv").read_text().splitlines()) - 1
            assert svg.count("<circle") == n_pts == recs[0]["steps"] + 1


class TestDeterminism:
    @pytest.mark.parametrize("cfg", ["orbit.toml", "hitting.toml"])
    def test_byte_identical(self, tmp_path, cfg):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["--config", str(CONFIGS / cfg), "--trials", "200"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b), "--threads", "2"]) == 0
        assert files(a) == files(b)

    def test_cover_time_identical(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('experiment = "cover-time"\nlevels = [4, 5]\n[system]\nkind = "carpet"\nname = "row1"\n')
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["--config", str(cfg), "--trials", "30", "--out", str(a)]) == 0
        assert main(["--config", str(cfg), "--trials", "30", "--out", str(b)]) == 0
        assert files(a) == files(b)
        assert main(["--config", str(cfg), "--trials", "30", "--seed", "2", "--out", str(tmp_path / "c")]) == 0
        assert files(a) != files(tmp_path / "c")


class TestErrors:
    def test_bad_experiment_in_config(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('experiment = "nope"\n')
        out = tmp_path / "out"
        assert main(["--config", str(cfg), "--out", str(out)]) == 2
        rec = json.loads((out / "error.json").read_text())
        assert rec["status"] == "error" and "nope" in rec["message"]

    def test_bad_driver(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('experiment = "cover-time"\n[driver]\nkind = "bernoulli"\nweights = [0.5, 0.6, 0.1]\n')
        assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"tirals": 3})

    def test_step_ceiling(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('experiment = "cover-time"\nstep_ceiling = 50\nlevels = [6]\n')
        out = tmp_path / "o"
        assert main(["--config", str(cfg), "--trials", "2", "--out", str(out)]) == 2
        rec = json.loads((out / "error.json").read_text())
        assert rec["type"] == "StepCeilingReached" and rec["completed_trials"] == 0

    def test_module_entry(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "chaoscover", "--experiment", "table1", "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["status"] == "ok"


class TestConfig:
    def test_hash_ignores_output_location(self):
        a = ExperimentConfig(out="x", threads=1)
        b = ExperimentConfig(out="y", threads=4)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != ExperimentConfig(seed=1).config_hash()

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
    def test_shipped_configs_validate(self, name):
        ExperimentConfig.load(CONFIGS / name).validate()


class TestSvg:
    def test_empty(self, tmp_path):
        src = tmp_path / "p.csv"
        src.write_text("step,x,y\n")
        assert emit_svg_points(src, tmp_path / "p.svg") == 0
        text = (tmp_path / "p.svg").read_text()
        assert text.startswith("<?xml") and "<circle" not in text and text.rstrip().endswith("</svg>")

    def test_three_points(self, tmp_path):
        src = tmp_path / "p.csv"
        src.write_text("step,x,y\n0,0,0\n1,1,1\n2,0.5,0.25\n")
        emit_svg_points(src, tmp_path / "p.svg", SvgStyle(size=100, radius=1))
        text = (tmp_path / "p.svg").read_text()
        assert text.count("<circle") == 3
        assert '<circle cx="0.000" cy="100.000" r="1.000"/>' in text
        assert '<circle cx="50.000" cy="75.000" r="1.000"/>' in text

    def test_deterministic(self, tmp_path):
        src = tmp_path / "p.csv"
        src.write_text("x,y\n0.1,0.2\n0.3,0.4\n")
        emit_svg_points(src, tmp_path / "a.svg")
        emit_svg_points(src, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_malformed_line_number(self, tmp_path):
        src = tmp_path / "p.csv"
        src.write_text("x,y\n0.1,0.2\n0.3,abc\n")
        with pytest.raises(PointFileError, match=":3:"):
            read_points(src)
        src.write_text("x,y\n0.1,0.2\n2.0,0.5\n")
        with pytest.raises(PointFileError, match=":3:"):
            read_points(src)

    def test_large(self, tmp_path):
        import time

        rng = np.random.default_rng(0)
        pts = rng.random((100000, 2))
        src = tmp_path / "big.csv"
        src.write_text("x,y\n" + "".join(f"{x:.17g},{y:.17g}\n" for x, y in pts))
        t = time.perf_counter()
        emit_svg_points(src, tmp_path / "big.svg")
        assert time.perf_counter() - t < 5
        assert (tmp_path / "big.svg").stat().st_size < 20 * 2**20
