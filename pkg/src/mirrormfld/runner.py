"""Experiment driver: diagnostics, file outputs, run comparison.

One run produces a metrics CSV (one row per diagnostics tick), a summary
JSON echoing the full config, and optionally the final particle cloud as
CSV for scatter plots.

Metrics CSV schema (fixed order, golden-tested)::

    iteration, objective, boundary_fraction, mean_0 .. mean_{d-1},
    coord_min, coord_max, wall_ms

Floats are written with ``repr`` so equal runs produce byte-identical
files; ``wall_ms`` is the only nondeterministic column.  Bit-exactness is
promised per platform and build, not across architectures.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_mirror_map, build_objective
from .dynamics import ParticleEnsemble, SamplerConfig, initial_ensemble, run_sampler
from .errors import MismatchedObjectiveError

Array = np.ndarray

METRIC_COLUMNS = ("iteration", "objective", "boundary_fraction")
TAIL_COLUMNS = ("coord_min", "coord_max", "wall_ms")


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    objective_value: float
    boundary_fraction: float
    mean: tuple
    coord_min: float
    coord_max: float
    wall_ms: float


def boundary_fraction(ambient: Array, mirror_map, epsilon: float) -> float:
    """Share of particles within epsilon of the domain boundary."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if mirror_map.kind == "simplex-entropy":
        dist = np.min(ambient, axis=-1)
    else:
        dist = np.min(np.minimum(ambient - mirror_map.lower,
                                 mirror_map.upper - ambient), axis=-1)
    return float(np.mean(dist < epsilon))


def metrics_recorder(mirror_map, objective, epsilon: float):
    """Build the per-iteration diagnostics callback used by ``run_sampler``."""
    clock = time.perf_counter
    start = clock()

    def record(iteration: int, ensemble: ParticleEnsemble, ambient: Array) -> MetricsRow:
        stats = objective.stats(ambient)
        return MetricsRow(
            iteration=iteration,
            objective_value=objective.value(ambient, stats),
            boundary_fraction=boundary_fraction(ambient, mirror_map, epsilon),
            mean=tuple(float(v) for v in np.mean(ambient, axis=0)),
            coord_min=float(np.min(ambient)),
            coord_max=float(np.max(ambient)),
            wall_ms=(clock() - start) * 1e3,
        )

    return record


def metrics_header(ambient_dim: int) -> list[str]:
    return list(METRIC_COLUMNS) + [f"mean_{c}" for c in range(ambient_dim)] \
        + list(TAIL_COLUMNS)


def write_metrics_csv(path, rows, ambient_dim: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(metrics_header(ambient_dim))
        for row in rows:
            writer.writerow([row.iteration, repr(row.objective_value),
                             repr(row.boundary_fraction),
                             *(repr(m) for m in row.mean),
                             repr(row.coord_min), repr(row.coord_max),
                             repr(row.wall_ms)])


def write_particles_csv(path, ambient: Array) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x_{c}" for c in range(ambient.shape[1])])
        for row in ambient:
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class RunResult:
    summary: dict
    metrics: tuple
    metrics_path: Path
    summary_path: Path
    particles_path: Path | None
    ensemble: ParticleEnsemble


def run_experiment(config: RunConfig, *, workers: int = 1,
                   label: str | None = None) -> RunResult:
    """Execute one configured run and write its artifacts.

    Outputs land in ``config.out_dir`` as ``<label>_metrics.csv``,
    ``<label>_summary.json`` and optionally ``<label>_particles.csv``; the
    default label is ``<sampler>_seed<seed>``.  Output is written only
    after the full run succeeds, so no partial summary is left behind.
    """
    mirror_map = build_mirror_map(config)
    objective = build_objective(config)
    spec = config.sampler
    cfg = SamplerConfig(sampler=spec.kind, eta=spec.eta, temperature=spec.temperature,
                        substeps=spec.substeps, steps=spec.steps)
    ensemble = initial_ensemble(mirror_map, spec.particles, config.seed,
                                ambient=spec.kind != "mmfld")
    record = metrics_recorder(mirror_map, objective, config.boundary_epsilon)

    t0 = time.perf_counter()
    ensemble, rows = run_sampler(ensemble, mirror_map, objective, cfg,
                                 diagnostics=record, every=config.every,
                                 workers=workers)
    runtime = time.perf_counter() - t0

    ambient = mirror_map.embed(ensemble.points) if spec.kind == "mmfld" else ensemble.points
    final = rows[-1] if rows else record(ensemble.iteration, ensemble, ambient)
    summary = {
        "version": __version__,
        "label": label or f"{spec.kind}_seed{config.seed}",
        "sampler": spec.kind,
        "seed": config.seed,
        "iterations": ensemble.iteration,
        "particles": spec.particles,
        "workers": workers,
        "final_objective": final.objective_value,
        "final_boundary_fraction": final.boundary_fraction,
        "mean": list(final.mean),
        "variance": np.var(ambient, axis=0).tolist(),
        "runtime_s": runtime,
        "config": config.to_dict(),
    }

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = summary["label"]
    metrics_path = out_dir / f"{stem}_metrics.csv"
    summary_path = out_dir / f"{stem}_summary.json"
    write_metrics_csv(metrics_path, rows, mirror_map.ambient_dim)
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    particles_path = None
    if config.dump_particles:
        particles_path = out_dir / f"{stem}_particles.csv"
        write_particles_csv(particles_path, ambient)
    return RunResult(summary=summary, metrics=tuple(rows), metrics_path=metrics_path,
                     summary_path=summary_path, particles_path=particles_path,
                     ensemble=ensemble)


def compare_runs(*summaries: dict) -> dict:
    """Pairwise-comparable report over runs sharing an objective.

    Declares winners on final objective and final boundary fraction (lower
    is better for both).  Raises ``MismatchedObjectiveError`` when the runs
    optimize different objectives.
    """
    if len(summaries) < 2:
        raise ValueError("need at least two run summaries to compare")
    reference = summaries[0]["config"]["objective"]
    for s in summaries[1:]:
        if s["config"]["objective"] != reference:
            raise MismatchedObjectiveError(
                f"objective mismatch: {reference} vs {s['config']['objective']}")
    labels = [s.get("label", f"run{i}") for i, s in enumerate(summaries)]
    objectives = [s["final_objective"] for s in summaries]
    fractions = [s["final_boundary_fraction"] for s in summaries]
    baseline = summaries[0]
    return {
        "objective": reference,
        "runs": [{
            "label": lab,
            "sampler": s["sampler"],
            "seed": s["seed"],
            "final_objective": obj,
            "final_boundary_fraction": frac,
            "objective_delta": obj - baseline["final_objective"],
            "boundary_fraction_delta": frac - baseline["final_boundary_fraction"],
        } for lab, s, obj, frac in zip(labels, summaries, objectives, fractions)],
        "winner_final_objective": labels[int(np.argmin(objectives))],
        "winner_boundary_fraction": labels[int(np.argmin(fractions))],
    }


def load_summary(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
