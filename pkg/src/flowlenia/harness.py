"""Experiment orchestration: config files, run directories, persistence.

A run directory run-<seed>/ holds everything needed to reproduce and
inspect a run: manifest.json (config snapshot, seed, encoder identity,
wiring, timestamps), stats.csv (one row per generation), periodic best-
individual dumps (Cartesian and polar PNG, genome JSON, profile CSV),
the final population's genomes, and the initial/final complexity
histogram data.
"""

from __future__ import annotations

import csv
import json
import os
import traceback
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, charts, complexity, evolution, sim


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


class MissingStats(RuntimeError):
    """A chart input file is absent from the run directory."""


@dataclass(frozen=True)
class ExperimentConfig:
    evo: evolution.EvolutionConfig
    out_dir: str = "runs"
    dump_every: int = 10

    def validate(self) -> None:
        self.evo.validate()
        if self.dump_every < 1:
            raise ConfigError(f"dump_every must be >= 1, got {self.dump_every}")


_WORLD_KEYS = {"H", "W", "C", "patch"}
_DYNAMICS_KEYS = {"dt", "theta_a", "n_alpha", "ell", "d_max"}
_TOP_KEYS = {
    "T",
    "S",
    "population_size",
    "generations",
    "mutation_rate",
    "crossover_gene_prob",
    "elite_count",
    "rollout_steps",
    "seed",
    "workers",
    "dump_every",
    "out",
    "world",
    "bounds",
    "dynamics",
}


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a validated config from a parsed JSON object; rejects unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "T" not in doc:
        raise ConfigError("config must set the complexity target T")

    world_doc = doc.get("world", {})
    unknown = set(world_doc) - _WORLD_KEYS
    if unknown:
        raise ConfigError(f"unknown world keys {sorted(unknown)}")
    world = evolution.WorldParams(
        H=int(world_doc.get("H", 256)),
        W=int(world_doc.get("W", 256)),
        C=int(world_doc.get("C", 3)),
        patch=int(world_doc.get("patch", 64)),
    )

    dyn_doc = doc.get("dynamics", {})
    unknown = set(dyn_doc) - _DYNAMICS_KEYS
    if unknown:
        raise ConfigError(f"unknown dynamics keys {sorted(unknown)}")
    base = sim.DynamicsParams()
    dynamics = sim.DynamicsParams(
        dt=float(dyn_doc.get("dt", base.dt)),
        theta_a=float(dyn_doc.get("theta_a", base.theta_a)),
        n_alpha=float(dyn_doc.get("n_alpha", base.n_alpha)),
        ell=float(dyn_doc.get("ell", base.ell)),
        d_max=float(dyn_doc.get("d_max", base.d_max)),
    )

    bounds_doc = doc.get("bounds", {})
    if not isinstance(bounds_doc, dict):
        raise ConfigError("bounds must be an object of gene: [low, high]")
    bounds = {}
    for name, pair in bounds_doc.items():
        if name not in evolution.DEFAULT_BOUNDS:
            raise ConfigError(f"unknown bounds gene {name!r}")
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ConfigError(f"bounds for {name!r} must be [low, high]")
        bounds[name] = (float(pair[0]), float(pair[1]))

    try:
        evo = evolution.EvolutionConfig(
            T=float(doc["T"]),
            S=int(doc.get("S", 4)),
            population_size=int(doc.get("population_size", 50)),
            generations=int(doc.get("generations", 50)),
            mutation_rate=float(doc.get("mutation_rate", 0.05)),
            crossover_gene_prob=float(doc.get("crossover_gene_prob", 0.5)),
            elite_count=int(doc.get("elite_count", 1)),
            rollout_steps=int(doc.get("rollout_steps", 2000)),
            world=world,
            seed=int(doc.get("seed", 0)),
            workers=int(doc.get("workers", 1)),
            bounds=bounds,
            dynamics=dynamics,
        )
        cfg = ExperimentConfig(
            evo=evo,
            out_dir=str(doc.get("out", "runs")),
            dump_every=int(doc.get("dump_every", 10)),
        )
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical, fully resolved JSON form; config_from_dict round-trips it."""
    evo = cfg.evo
    return {
        "T": evo.T,
        "S": evo.S,
        "population_size": evo.population_size,
        "generations": evo.generations,
        "mutation_rate": evo.mutation_rate,
        "crossover_gene_prob": evo.crossover_gene_prob,
        "elite_count": evo.elite_count,
        "rollout_steps": evo.rollout_steps,
        "seed": evo.seed,
        "workers": evo.workers,
        "dump_every": cfg.dump_every,
        "out": cfg.out_dir,
        "world": {
            "H": evo.world.H,
            "W": evo.world.W,
            "C": evo.world.C,
            "patch": evo.world.patch,
        },
        "bounds": {k: [lo, hi] for k, (lo, hi) in sorted(evo.bounds.items())},
        "dynamics": {
            "dt": evo.dynamics.dt,
            "theta_a": evo.dynamics.theta_a,
            "n_alpha": evo.dynamics.n_alpha,
            "ell": evo.dynamics.ell,
            "d_max": evo.dynamics.d_max,
        },
    }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(doc)


def _effective_workers(cfg: ExperimentConfig) -> int:
    env = os.environ.get("FLF_THREADS")
    if env:
        workers = int(env)
        if workers < 1:
            raise ConfigError(f"FLF_THREADS must be >= 1, got {env}")
        return workers
    return cfg.evo.workers


def _render_best(ind: evolution.Individual, evo: evolution.EvolutionConfig, wiring):
    """Recreate the final state behind an individual's cached fitness."""
    rule = evolution.decode_genome(ind.genes, wiring, evo.dynamics)
    world = evo.world
    state = sim.init_state(
        evolution.init_seed(evo.seed, ind.eval_gen, ind.eval_slot),
        world.H,
        world.W,
        world.C,
        world.patch,
    )
    return sim.run(rule, state, evo.rollout_steps)


def _write_histogram_csv(path, values) -> None:
    with open(path, "w") as fh:
        fh.write("c0\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


def run_experiment(config: ExperimentConfig) -> Path:
    """Evolve per config and persist the run; returns the run directory."""
    config.validate()
    evo = replace(config.evo, workers=_effective_workers(config))
    run_dir = Path(config.out_dir) / f"run-{evo.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    marker = run_dir / "INCOMPLETE"
    started = datetime.now(timezone.utc).isoformat()
    space = evolution.SearchSpace.default(evo.n_kernels, evo.bounds)

    def dump(gen: int, pop: list[evolution.Individual], wiring) -> None:
        if gen % config.dump_every:
            return
        best = min(range(len(pop)), key=lambda i: (pop[i].fitness, i))
        ind = pop[best]
        final = _render_best(ind, evo, wiring)
        img = complexity.state_to_image(final)
        # center from the dumped rendering itself, so the polar dump is exactly
        # reproducible from the Cartesian dump
        polar = complexity.polar_resample(img, complexity.mass_center(img.astype(np.float64) / 255.0))
        complexity.write_png(run_dir / f"gen{gen}_best.png", img)
        complexity.write_png(run_dir / f"gen{gen}_best_polar.png", polar)
        evolution.save_genome(run_dir / f"gen{gen}_best.genome.json", ind.genes, space, wiring)
        complexity.write_profile_csv(run_dir / f"gen{gen}_best.profile.csv", ind.profile)

    try:
        result = evolution.evolve(evo, on_generation=dump)
        evolution.write_stats_csv(run_dir / "stats.csv", result.history)
        _write_histogram_csv(run_dir / "hist_initial.csv", result.c0_initial)
        _write_histogram_csv(run_dir / "hist_final.csv", result.c0_final)
        pop_dir = run_dir / "population"
        pop_dir.mkdir(exist_ok=True)
        for slot, ind in enumerate(result.population):
            evolution.save_genome(
                pop_dir / f"ind{slot:02d}.genome.json", ind.genes, space, result.wiring
            )
        manifest = {
            "tool": "flowlenia",
            "version": __version__,
            "seed": evo.seed,
            "config": config_to_dict(replace(config, evo=evo)),
            "encoder": complexity.ENCODER_INFO,
            "backend": sim.backend_name(),
            "wiring": [[int(s), int(d)] for s, d in result.wiring],
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
        }
        with open(run_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except BaseException as exc:
        marker.write_text(f"aborted: {exc}\n{traceback.format_exc()}")
        raise
    else:
        if marker.exists():
            marker.unlink()
    return run_dir


def _read_stats(path: Path) -> list[dict]:
    if not path.is_file():
        raise MissingStats(f"{path} not found")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise MissingStats(f"{path} has no rows")
    return rows


def _read_histogram(path: Path) -> list[float]:
    if not path.is_file():
        raise MissingStats(f"{path} not found")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["c0"]) for r in rows]


def emit_charts(run_dir) -> tuple[Path, Path]:
    """Render trend.svg and hist.svg from a run directory's CSV files."""
    run_dir = Path(run_dir)
    rows = _read_stats(run_dir / "stats.csv")
    gens = [int(r["gen"]) for r in rows]
    trend = charts.render_trend_svg(
        gens,
        [float(r["best_c0"]) for r in rows],
        [float(r["mean_c0"]) for r in rows],
        [float(r["min_c0"]) for r in rows],
        [float(r["max_c0"]) for r in rows],
    )
    initial = _read_histogram(run_dir / "hist_initial.csv")
    final = _read_histogram(run_dir / "hist_final.csv")
    hist = charts.render_hist_svg(initial, final, best=float(rows[-1]["best_c0"]))
    trend_path = run_dir / "trend.svg"
    hist_path = run_dir / "hist.svg"
    trend_path.write_text(trend)
    hist_path.write_text(hist)
    return trend_path, hist_path
