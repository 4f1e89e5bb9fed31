import json
import math
from pathlib import Path

import numpy as np
import pytest

from conftest import random_genome
from eigen import cli, imaging, pipeline
from eigen.errors import ConfigError
from eigen.pipeline import (RunConfig, build_config, converged,
                            evaluate_genome, load_config, load_checkpoint,
                            parse_predictor_spec, run)

FAST = dict(max_generations=2, species_count=2, species_size=3,
            sequence_length=3, workers=1)


def constant_genome():
    from eigen.cppn import ConnectionGene, CppnGenome, NodeGene
    nodes = [NodeGene(i, "input", "identity", 0.0) for i in range(4)]
    nodes += [NodeGene(4, "output", "tanh", math.atanh(2 * 0.3 - 1))]
    return CppnGenome(tuple(nodes), ())


class TestConfig:
    def test_defaults_match_stated_parameters(self):
        cfg = RunConfig()
        assert (cfg.width, cfg.height) == (160, 120)
        assert cfg.sequence_length == 20
        assert cfg.extension == 2
        assert (cfg.species_count, cfg.species_size) == (5, 10)

    def test_file_parsing(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# a comment\nseed = 9\nmode = binary\n"
                     "band_width = 7.5  # trailing comment\ndiagnostics = true\n")
        cfg = load_config(p)
        assert cfg.seed == 9
        assert cfg.mode == "binary"
        assert cfg.band_width == 7.5
        assert cfg.diagnostics is True

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("seed = 9\n")
        cfg = load_config(p, {"seed": 42})
        assert cfg.seed == 42

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            build_config({"no_such_key": "1"})

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            build_config({"seed": "not-a-number"})

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            RunConfig(mode="sepia")

    def test_rings_must_fit(self):
        with pytest.raises(ConfigError):
            RunConfig(width=40, height=40, ring_count=10, band_width=10.0)

    def test_predictor_specs(self):
        assert parse_predictor_spec("identity") == ("identity",)
        assert parse_predictor_spec("shift:2,0") == ("shift", 2.0, 0.0)
        assert parse_predictor_spec("drift:0.5") == ("drift", 0.5)
        assert parse_predictor_spec("external:foo --bar") == ("external", "foo --bar")
        with pytest.raises(ConfigError):
            parse_predictor_spec("warp:1")
        with pytest.raises(ConfigError):
            parse_predictor_spec("shift:2")


class TestEvaluateGenome:
    def test_identity_predictor_scores_zero(self):
        cfg = RunConfig(predictor="identity", sequence_length=3)
        sc, _ = evaluate_genome(constant_genome(), cfg)
        assert sc.total == 0.0

    def test_shift_predictor_recovers_motion(self):
        cfg = RunConfig(predictor="shift:2,0", sequence_length=3)
        sc, diag = evaluate_genome(random_genome(1), cfg)
        assert sc.n_valid > 0
        disps = np.array([v.displacement for v in diag["field"].tracked()])
        mean = disps.mean(axis=0)
        assert abs(mean[0] - 2.0) < 0.5
        assert abs(mean[1]) < 0.5

    def test_repeat_evaluation_identical(self):
        cfg = RunConfig(predictor="drift:1.0", sequence_length=3)
        g = random_genome(2)
        a, _ = evaluate_genome(g, cfg)
        b, _ = evaluate_genome(g, cfg)
        assert a == b

    def test_pred_pred_flow_pair(self):
        cfg = RunConfig(predictor="shift:1,0", flow_pair="pred_pred",
                        sequence_length=3)
        sc, diag = evaluate_genome(random_genome(3), cfg)
        disps = np.array([v.displacement for v in diag["field"].tracked()])
        # between predictions 1 and 2 the shift is another 1 px
        assert abs(disps.mean(axis=0)[0] - 1.0) < 0.5


class TestConverged:
    def test_converged_after_patience(self):
        assert converged(["a"] * 6, 5)

    def test_not_converged_on_change(self):
        assert not converged(["a", "a", "b"], 2)

    def test_insufficient_history(self):
        assert not converged(["a", "a"], 5)


class TestRun:
    def test_single_generation_artifacts(self, tmp_path):
        cfg = RunConfig(output_dir=str(tmp_path / "o"), max_generations=1,
                        **{k: v for k, v in FAST.items() if k != "max_generations"})
        reports = run(cfg)
        assert len(reports) == 1
        gen0 = tmp_path / "o" / "gen_0"
        for name in ("best.png", "best_overlay.png", "best_genome.json",
                     "scores.json"):
            assert (gen0 / name).exists()
        assert (tmp_path / "o" / "final" / "best.png").exists()

    def test_scores_file_covers_population(self, tmp_path):
        cfg = RunConfig(output_dir=str(tmp_path / "o"), **FAST)
        run(cfg)
        scores = json.loads((tmp_path / "o" / "gen_0" / "scores.json").read_text())
        assert len(scores) == cfg.species_count * cfg.species_size
        assert set(scores[0]) == {"total", "n_valid", "magnitude", "align",
                                  "oppose"}

    def test_best_genome_renders_back(self, tmp_path):
        from eigen.cppn import CppnGenome
        cfg = RunConfig(output_dir=str(tmp_path / "o"), **FAST)
        run(cfg)
        text = (tmp_path / "o" / "gen_1" / "best_genome.json").read_text()
        CppnGenome.from_json(text)  # parses and validates

    def test_evaluation_order_independence(self, tmp_path):
        cfg1 = RunConfig(output_dir=str(tmp_path / "a"),
                         **{**FAST, "workers": 1})
        cfg4 = RunConfig(output_dir=str(tmp_path / "b"),
                         **{**FAST, "workers": 4})
        run(cfg1)
        run(cfg4)
        a = (tmp_path / "a" / "gen_1" / "scores.json").read_bytes()
        b = (tmp_path / "b" / "gen_1" / "scores.json").read_bytes()
        assert a == b

    def test_monotone_best_fitness(self, tmp_path):
        cfg = RunConfig(output_dir=str(tmp_path / "o"), seed=5,
                        **{**FAST, "max_generations": 4})
        reports = run(cfg)
        totals = [r.best_total for r in reports]
        assert all(b >= a - 1e-9 for a, b in zip(totals, totals[1:]))

    def test_checkpoint_loads(self, tmp_path):
        cfg = RunConfig(output_dir=str(tmp_path / "o"),
                        **{**FAST, "max_generations": 3})
        run(cfg)
        pop, cfg2, history = load_checkpoint(tmp_path / "o" / "checkpoint.json")
        assert cfg2.seed == cfg.seed
        assert pop.generation >= 1
        assert len(history) >= 1


class TestCli:
    def test_score_command(self, tmp_path, capsys):
        imaging.save_png(
            __import__("conftest").textured_raster(0), tmp_path / "img.png")
        code = cli.main(["score", "--image", str(tmp_path / "img.png"),
                         "--predictor", "shift:1,0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert doc["n_valid"] > 0

    def test_score_missing_image_exit_3(self, tmp_path):
        assert cli.main(["score", "--image", str(tmp_path / "nope.png")]) == 3

    def test_run_bad_config_exit_2(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("definitely_not_a_key = 1\n")
        assert cli.main(["run", "--config", str(p)]) == 2

    def test_run_and_resume_commands(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(
            "max_generations = 3\nspecies_count = 2\nspecies_size = 3\n"
            "sequence_length = 3\nworkers = 1\n")
        out = tmp_path / "out"
        assert cli.main(["run", "--config", str(cfgfile), "--seed", "1",
                         "--out", str(out)]) == 0
        assert (out / "gen_2" / "best.png").exists()
        # resume from the rolling checkpoint finishes the remaining generations
        ckpt = out / "gen_1" / "checkpoint.json"
        assert ckpt.exists()
        assert cli.main(["resume", "--checkpoint", str(ckpt)]) == 0

    def test_score_sidecar_failure_exit_4(self, tmp_path):
        import sys
        stub = Path(__file__).parent / "sidecar_stub.py"
        imaging.save_png(
            __import__("conftest").textured_raster(0), tmp_path / "img.png")
        code = cli.main(["score", "--image", str(tmp_path / "img.png"),
                         "--predictor",
                         f"external:{sys.executable} {stub} error"])
        assert code == 4
