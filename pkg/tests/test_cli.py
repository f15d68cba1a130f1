"""Command-line behavior and exit codes."""

import json

import numpy as np
import pytest

from flowlenia import cli, complexity
from flowlenia import evolution as ev
from flowlenia import sim


def make_genome_file(tmp_path, n_kernels=12, seed=0, r_hi=6.0):
    space = ev.SearchSpace.default(n_kernels, {"R": (2.0, r_hi)})
    rng = np.random.default_rng(seed)
    genes = ev.sample_genome(space, rng)
    wiring = ev.sample_wiring(rng, n_kernels, 3)
    path = tmp_path / "g.genome.json"
    ev.save_genome(path, genes, space, wiring)
    return path


class TestTopLevel:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--version"])
        assert exc.value.code == 0
        assert "flowlenia" in capsys.readouterr().out

    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2


class TestComplexityCommand:
    def test_constant_png_single_scale(self, tmp_path, capsys):
        img = np.full((256, 256, 3), 30, dtype=np.uint8)
        path = tmp_path / "constant.png"
        complexity.write_png(path, img)
        rc = cli.main(["complexity", "--input", str(path), "--scales", "0"])
        out = capsys.readouterr().out.strip().splitlines()
        assert rc == 0
        assert len(out) == 1
        scale, ratio = out[0].split(",")
        assert scale == "0"
        assert float(ratio) < 0.02

    def test_state_input_with_target(self, tmp_path, capsys):
        state = sim.init_state(0, 64, 64, 3, 32)
        path = tmp_path / "state.flst"
        sim.save_state(path, state)
        rc = cli.main(["complexity", "--input", str(path), "--scales", "2", "--target", "0.4"])
        out = capsys.readouterr().out.strip().splitlines()
        assert rc == 0
        assert len(out) == 4
        assert out[-1].startswith("fitness,")
        profile = [float(line.split(",")[1]) for line in out[:-1]]
        fit = float(out[-1].split(",")[1])
        assert fit == pytest.approx(np.mean(np.abs(np.array(profile) - 0.4)))

    def test_no_polar_flag_changes_result(self, tmp_path, capsys):
        state = sim.init_state(1, 64, 64, 3, 32)
        path = tmp_path / "state.flst"
        sim.save_state(path, state)
        cli.main(["complexity", "--input", str(path), "--scales", "0"])
        with_polar = capsys.readouterr().out
        cli.main(["complexity", "--input", str(path), "--scales", "0", "--no-polar"])
        without = capsys.readouterr().out
        assert with_polar != without

    def test_missing_input_exits_2(self, capsys):
        rc = cli.main(["complexity", "--input", "no-such-file.flst"])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_indivisible_scale_exits_1(self, tmp_path, capsys):
        state = np.zeros((48, 48, 3))
        path = tmp_path / "s.flst"
        sim.save_state(path, state)
        rc = cli.main(["complexity", "--input", str(path), "--scales", "5"])
        assert rc == 1


class TestSimulateCommand:
    def test_zero_steps_dumps_initial_only(self, tmp_path, capsys):
        genome = make_genome_file(tmp_path)
        out = tmp_path / "simout"
        rc = cli.main(
            ["simulate", "--genome", str(genome), "--steps", "0", "--out", str(out),
             "--size", "64", "--patch", "32"]
        )
        assert rc == 0
        assert sorted(p.name for p in out.iterdir()) == ["final.flst", "final.png"]
        final = sim.load_state(out / "final.flst")
        expect = sim.init_state(0, 64, 64, 3, 32)
        assert np.allclose(final, expect, atol=1e-7)  # float32 storage

    def test_dump_cadence(self, tmp_path):
        genome = make_genome_file(tmp_path)
        out = tmp_path / "simout2"
        rc = cli.main(
            ["simulate", "--genome", str(genome), "--steps", "4", "--dump-every", "2",
             "--out", str(out), "--size", "64", "--patch", "32"]
        )
        assert rc == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["final.flst", "final.png", "step0000.png", "step0002.png", "step0004.png"]

    def test_missing_genome_exits_2(self):
        assert cli.main(["simulate", "--genome", "missing.json", "--steps", "1"]) == 2

    def test_wiring_channel_mismatch_exits_2(self, tmp_path):
        genome = make_genome_file(tmp_path)
        rc = cli.main(
            ["simulate", "--genome", str(genome), "--steps", "1", "--channels", "1",
             "--out", str(tmp_path / "x")]
        )
        assert rc == 2


class TestEvolveCommand:
    def test_missing_config_exits_2(self, capsys):
        rc = cli.main(["evolve", "--config", "missing.json"])
        assert rc == 2
        assert "does not exist" in capsys.readouterr().err

    def test_malformed_config_exits_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"T": 0.4, "nonsense": True}))
        assert cli.main(["evolve", "--config", str(path)]) == 2

    def test_tiny_run_and_plot(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps(
                {
                    "T": 0.4,
                    "S": 2,
                    "population_size": 3,
                    "generations": 1,
                    "rollout_steps": 2,
                    "world": {"H": 32, "W": 32, "C": 3, "patch": 16},
                    "bounds": {"R": [2.0, 6.0]},
                    "out": str(tmp_path / "runs"),
                }
            )
        )
        rc = cli.main(["evolve", "--config", str(path), "--seed", "11"])
        assert rc == 0
        run_dir = capsys.readouterr().out.strip()
        assert run_dir.endswith("run-11")
        rc = cli.main(["plot", "--run", run_dir])
        assert rc == 0
        out = capsys.readouterr().out
        assert "trend.svg" in out and "hist.svg" in out

    def test_plot_missing_dir_exits_2(self):
        assert cli.main(["plot", "--run", "no-such-dir"]) == 2

    def test_plot_empty_dir_exits_1(self, tmp_path):
        assert cli.main(["plot", "--run", str(tmp_path)]) == 1
