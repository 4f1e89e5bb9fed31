"""End-to-end orchestration: config, the seeded evolution loop, concurrent
genome evaluation, convergence detection, checkpointing and artifact output.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import fitness, imaging, neat, predictor as pred
from .cppn import CppnGenome, RingGeometry, render
from .errors import ConfigError, EigenError, IoError
from .fitness import FitnessParams, FitnessScore
from .flow import FlowParams, flow_between
from .neat import NeatParams, Population

log = logging.getLogger("eigen")

MODES = ("gray", "color", "binary")
FLOW_PAIRS = ("input_pred", "pred_pred")


@dataclass
class RunConfig:
    # geometry / rendering
    width: int = 160
    height: int = 120
    mode: str = "gray"
    use_ring_geometry: bool = True
    ring_count: int = 4
    band_width: float = 10.0
    angular_period: int = 8
    inner_radius: float = 10.0
    # predictor
    sequence_length: int = 20
    extension: int = 2
    predictor: str = "drift:1.0"  # identity | shift:dx,dy | drift:gain | external:cmd
    flow_pair: str = "input_pred"
    # flow
    max_features: int = 200
    shi_tomasi_quality: float = 0.01
    min_feature_distance: float = 5.0
    window: int = 15
    pyramid_levels: int = 3
    max_iterations: int = 20
    epsilon: float = 0.01
    min_eigen_threshold: float = 1e-4
    # fitness
    magnitude_cap: float = 2.0
    min_magnitude: float = 0.05
    neighborhood_radius: float = 20.0
    align_angle: float = 30.0
    oppose_angle: float = 30.0
    weight_count: float = 1.0
    weight_magnitude: float = 1.0
    weight_align: float = 1.0
    weight_oppose: float = 1.0
    # neat
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.4
    compatibility_threshold: float = 3.0
    weight_mutate_rate: float = 0.8
    weight_perturb_sigma: float = 0.5
    add_connection_rate: float = 0.1
    add_node_rate: float = 0.03
    crossover_rate: float = 0.75
    elitism_per_species: int = 1
    stagnation_limit: int = 15
    parent_fraction: float = 0.5
    species_count: int = 5
    species_size: int = 10
    # run control
    max_generations: int = 20
    convergence_patience: int = 5
    seed: int = 0
    output_dir: str = "out"
    diagnostics: bool = False
    initial_weight_sigma: float = 0.05
    workers: int = 0  # 0 = available parallelism

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("width and height must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.flow_pair not in FLOW_PAIRS:
            raise ConfigError(f"flow_pair must be one of {FLOW_PAIRS}")
        if self.sequence_length < 1:
            raise ConfigError("sequence_length must be >= 1")
        if self.species_count * self.species_size < 2:
            raise ConfigError("population must hold at least 2 genomes")
        if self.flow_pair == "pred_pred" and self.extension < 2:
            raise ConfigError("flow_pair=pred_pred needs extension >= 2")
        if self.use_ring_geometry:
            geom = self.ring_geometry()
            if geom.outer_radius > min(self.width, self.height) / 2:
                raise ConfigError("rings do not fit inside the raster")
        parse_predictor_spec(self.predictor)  # validates

    @property
    def channels(self) -> int:
        return 3 if self.mode == "color" else 1

    def ring_geometry(self) -> RingGeometry | None:
        if not self.use_ring_geometry:
            return None
        return RingGeometry(center=(self.width / 2.0, self.height / 2.0),
                            ring_count=self.ring_count,
                            band_width=self.band_width,
                            angular_period=self.angular_period,
                            inner_radius=self.inner_radius)

    def flow_params(self) -> FlowParams:
        return FlowParams(self.max_features, self.shi_tomasi_quality,
                          self.min_feature_distance, self.window,
                          self.pyramid_levels, self.max_iterations,
                          self.epsilon, self.min_eigen_threshold)

    def fitness_params(self) -> FitnessParams:
        return FitnessParams(self.magnitude_cap, self.min_magnitude,
                             self.neighborhood_radius, self.align_angle,
                             self.oppose_angle, self.weight_count,
                             self.weight_magnitude, self.weight_align,
                             self.weight_oppose)

    def neat_params(self) -> NeatParams:
        return NeatParams(self.c1, self.c2, self.c3, self.compatibility_threshold,
                          self.weight_mutate_rate, self.weight_perturb_sigma,
                          self.add_connection_rate, self.add_node_rate,
                          self.crossover_rate, self.elitism_per_species,
                          self.stagnation_limit, self.parent_fraction)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_predictor_spec(spec: str):
    """'identity' | 'shift:dx,dy' | 'drift:gain' | 'external:command'."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "identity":
            return ("identity",)
        if kind == "shift":
            dx, dy = (float(v) for v in arg.split(","))
            return ("shift", dx, dy)
        if kind == "drift":
            return ("drift", float(arg) if arg else 1.0)
        if kind == "external":
            if not arg:
                raise ValueError("external predictor needs a command")
            return ("external", arg)
    except ValueError as e:
        raise ConfigError(f"bad predictor spec {spec!r}: {e}") from e
    raise ConfigError(f"unknown predictor kind {kind!r}")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Flat `key = value` config file with '#' comments; overrides win."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise IoError(f"cannot read config {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return build_config(values, overrides)


def build_config(values: dict, overrides: dict | None = None) -> RunConfig:
    merged = dict(values)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    kwargs = {}
    for key, val in merged.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(val, fields[key].type, key)
    return RunConfig(**kwargs)


def _coerce(val, ftype: str, key: str):
    if not isinstance(val, str):
        return val
    try:
        if ftype == "int":
            return int(val)
        if ftype == "float":
            return float(val)
        if ftype == "bool":
            if val.lower() in ("true", "1", "yes", "on"):
                return True
            if val.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {val!r}")
        return val
    except ValueError as e:
        raise ConfigError(f"config key {key!r}: {e}") from e


@dataclass
class GenerationReport:
    generation: int
    best_total: float
    species_best: list[float]
    wall_time: float


def make_predict_fn(cfg: RunConfig):
    """Callable PredictRequest -> PredictResponse plus a close() for cleanup."""
    spec = parse_predictor_spec(cfg.predictor)
    if spec[0] == "identity":
        return pred.predict_identity, lambda: None
    if spec[0] == "shift":
        _, dx, dy = spec
        return (lambda req: pred.predict_shift(req, dx, dy)), lambda: None
    if spec[0] == "drift":
        gain = spec[1]
        return (lambda req: pred.predict_gradient_drift(req, gain)), lambda: None
    client = pred.ExternalPredictor(spec[1])
    return client.predict, client.close


def evaluate_genome(genome: CppnGenome, cfg: RunConfig,
                    predict_fn=None) -> tuple[FitnessScore, dict]:
    """Render -> static sequence -> predict -> flow -> score.

    Returns the score plus a diagnostics dict with the rendered image, the
    vector field and the overlay inputs.
    """
    close = lambda: None
    if predict_fn is None:
        predict_fn, close = make_predict_fn(cfg)
    try:
        img = render(genome, cfg.ring_geometry(), cfg.width, cfg.height, cfg.mode)
        req = pred.make_static_sequence(img, cfg.sequence_length, cfg.extension)
        resp = predict_fn(req)
        if cfg.flow_pair == "pred_pred":
            a, b = resp.predicted[0], resp.predicted[1]
        else:
            a, b = img, resp.predicted[0]
        field_ = flow_between(a, b, cfg.flow_params())
        sc = fitness.score(field_, cfg.fitness_params())
        return sc, {"image": img, "field": field_, "score": sc}
    finally:
        close()


def converged(history: list[str], patience: int) -> bool:
    """True iff the last patience+1 best-genome ids are identical."""
    if patience < 0 or len(history) < patience + 1:
        return False
    tail = history[-(patience + 1):]
    return all(h == tail[0] for h in tail)


def _evaluate_population(pop: Population, cfg: RunConfig) -> list[FitnessScore]:
    genomes = pop.genomes()
    predict_fn, close = make_predict_fn(cfg)
    external = parse_predictor_spec(cfg.predictor)[0] == "external"
    workers = 1 if external else (cfg.workers or os.cpu_count() or 1)

    def one(g):
        try:
            sc, _ = evaluate_genome(g, cfg, predict_fn)
            return sc
        except EigenError as e:
            log.warning("evaluation failed, scoring 0: %s", e)
            return FitnessScore(0.0, 0, 0.0, 0.0, 0.0)

    try:
        if workers == 1:
            return [one(g) for g in genomes]
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, genomes))
    finally:
        close()


def _write_generation_artifacts(out: Path, gen: int, pop: Population,
                                cfg: RunConfig, history: list[str]) -> None:
    gen_dir = out / f"gen_{gen}"
    gen_dir.mkdir(parents=True, exist_ok=True)
    best_g, best_s = neat.best(pop)
    img = render(best_g, cfg.ring_geometry(), cfg.width, cfg.height, cfg.mode)
    imaging.save_png(img, gen_dir / "best.png")
    _, diag = evaluate_genome(best_g, cfg)
    overlay = imaging.render_overlay(img, diag["field"])
    imaging.save_png(overlay, gen_dir / "best_overlay.png")
    (gen_dir / "best_genome.json").write_text(best_g.to_json())
    scores = [json.loads(s.to_json()) for _, s in pop.scored_members()]
    (gen_dir / "scores.json").write_text(
        json.dumps(scores, sort_keys=True, separators=(",", ":")))
    if cfg.diagnostics:
        (gen_dir / "best_field.json").write_text(diag["field"].to_json())
        (gen_dir / "best_score.json").write_text(best_s.to_json())


def _write_checkpoint(path: Path, pop: Population, cfg: RunConfig,
                      history: list[str]) -> None:
    doc = {
        "config": cfg.to_dict(),
        "history": history,
        "population": json.loads(neat.population_to_json(pop)),
    }
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def load_checkpoint(path) -> tuple[Population, RunConfig, list[str]]:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise IoError(f"cannot read checkpoint {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad checkpoint {path}: {e}") from e
    cfg = RunConfig(**doc["config"])
    pop = neat.population_from_json(json.dumps(doc["population"]))
    return pop, cfg, list(doc["history"])


def run(cfg: RunConfig, pop: Population | None = None,
        history: list[str] | None = None) -> list[GenerationReport]:
    """The evolution loop: evaluate, report, reproduce, until convergence or
    max_generations. Pass a population/history to resume from a checkpoint.
    """
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create output dir {out}: {e}") from e

    if pop is None:
        pop = neat.initial_population(cfg.seed, cfg.channels, cfg.species_count,
                                      cfg.species_size, cfg.neat_params(),
                                      cfg.initial_weight_sigma)
    history = list(history or [])
    reports: list[GenerationReport] = []
    last_gen = None

    while pop.generation < cfg.max_generations:
        t0 = time.monotonic()
        scores = _evaluate_population(pop, cfg)
        pop.assign_scores(scores)
        best_g, best_s = neat.best(pop)
        history.append(neat.genome_key(best_g))
        species_best = [max(s.total for _, s in sp.members) for sp in pop.species]
        report = GenerationReport(pop.generation, best_s.total, species_best,
                                  time.monotonic() - t0)
        reports.append(report)
        log.info("gen %d best %.3f species %s (%.1fs)", report.generation,
                 report.best_total, ["%.2f" % b for b in species_best],
                 report.wall_time)
        _write_generation_artifacts(out, pop.generation, pop, cfg, history)
        last_gen = pop.generation

        if converged(history, cfg.convergence_patience):
            log.info("converged at generation %d", pop.generation)
            break
        if pop.generation + 1 >= cfg.max_generations:
            break
        pop = neat.next_generation(pop, cfg.neat_params(), cfg.species_count,
                                   cfg.species_size)
        _write_checkpoint(out / f"gen_{pop.generation - 1}" / "checkpoint.json",
                          pop, cfg, history)
        _write_checkpoint(out / "checkpoint.json", pop, cfg, history)

    if last_gen is not None:
        _mirror_final(out, last_gen)
    return reports


def _mirror_final(out: Path, gen: int) -> None:
    final = out / "final"
    final.mkdir(exist_ok=True)
    src = out / f"gen_{gen}"
    for name in ("best.png", "best_overlay.png", "best_genome.json", "scores.json"):
        p = src / name
        if p.exists():
            (final / name).write_bytes(p.read_bytes())


def resume(checkpoint_path) -> list[GenerationReport]:
    pop, cfg, history = load_checkpoint(checkpoint_path)
    return run(cfg, pop, history)
