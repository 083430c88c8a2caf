import os

import numpy as np
import pytest

from cvq import cli
from cvq.experiments import list_experiments, run_experiment


class TestRegistry:
    def test_full_listing(self):
        full = list_experiments()
        assert "gg02-kgr" in full and "kor-ratio" in full
        assert len(full) >= 10

    def test_filter(self):
        hits = list_experiments("nla")
        assert set(hits) == {"nla-kgr"}

    def test_unknown_filter_empty(self):
        assert list_experiments("zzz-nope") == {}

    def test_unknown_id_raises(self):
        with pytest.raises(KeyError):
            run_experiment("zzz-nope")


class TestCliProcess:
    def test_list_exit_zero(self, capsys):
        assert cli.main(["list"]) == 0
        out = capsys.readouterr().out
        assert "gg02-kgr" in out

    def test_unknown_experiment_exit_64(self, capsys):
        assert cli.main(["does-not-exist"]) == 64

    def test_bad_key_exit_64(self):
        assert cli.main(["capacities", "--key", "oops"]) == 64

    def test_run_and_determinism(self, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        argv = ["capacities", "--profile", "fast"]
        assert cli.main(argv + ["--out", str(out1)]) == 0
        assert cli.main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_csv_shape_and_header(self, tmp_path):
        out = tmp_path / "c.csv"
        assert cli.main(
            ["bpsk-curves", "--profile", "fast", "--out", str(out),
             "--key", "points=7"]
        ) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# cvq ")
        header = next(l for l in lines if not l.startswith("#"))
        assert header.split(",") == ["alpha2", "P_Hel", "P_SQL", "P_K", "P_IK", "P_HY"]
        data = [l for l in lines if not l.startswith("#")][1:]
        assert len(data) == 7

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("points = 5\nn_noise = 0.2  # thermal photons\n")
        out = tmp_path / "d.csv"
        rc = cli.main(
            ["capacities", "--profile", "fast", "--config", str(cfg),
             "--key", "points=6", "--out", str(out)]
        )
        assert rc == 0
        header = [l for l in out.read_text().splitlines() if l.startswith("# points")]
        assert header == ["# points = 6"]  # command line wins

    def test_svg_emitted(self, tmp_path):
        out = tmp_path / "e.csv"
        svg = tmp_path / "e.svg"
        rc = cli.main(
            ["capacities", "--profile", "fast", "--out", str(out),
             "--svg", str(svg)]
        )
        assert rc == 0
        body = svg.read_text()
        assert body.startswith("<svg") and "polyline" in body

    def test_gg02_fast_run(self, tmp_path):
        out = tmp_path / "g.csv"
        rc = cli.main(
            ["gg02-kgr", "--profile", "fast", "--out", str(out),
             "--key", "points=5", "--key", "eps=0.03"]
        )
        assert rc == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")][1:]
        ks = np.array([float(r.split(",")[1]) for r in rows])
        assert ks[0] > 0  # key at short distance
