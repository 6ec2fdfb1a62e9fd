"""Experiment driver: files, schema, determinism, comparison."""
import csv
import json

import numpy as np
import pytest

from mirrormfld.config import figure1_config, parse_config
from mirrormfld.errors import MismatchedObjectiveError
from mirrormfld.geometry import SimplexEntropyMap
from mirrormfld.runner import (
    boundary_fraction,
    compare_runs,
    load_summary,
    metrics_header,
    run_experiment,
)


def small_config(tmp_path, **over):
    raw = figure1_config(beta=0.0, particles=64, steps=6, out_dir=str(tmp_path))
    for key, val in over.items():
        section, _, name = key.partition(".")
        if name:
            raw[section][name] = val
        else:
            raw[section] = val
    return parse_config(json.dumps(raw))


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- boundary fraction ---------------------------------------------------------

def test_boundary_fraction_interior_cloud(simplex3):
    pts = np.tile([1 / 3, 1 / 3, 1 / 3], (10, 1))
    assert boundary_fraction(pts, simplex3, 1e-3) == 0.0


def test_boundary_fraction_counts_vertex(simplex3):
    pts = np.array([[1.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]])
    assert boundary_fraction(pts, simplex3, 1e-3) == 0.5


def test_boundary_fraction_uniform_margin_area(simplex3):
    # P(min coordinate < eps) for the uniform law is 6 eps - O(eps^2)
    rng = np.random.default_rng(3)
    pts = rng.dirichlet((1.0, 1.0, 1.0), size=1_000_000)
    frac = boundary_fraction(pts, simplex3, 1e-3)
    expect = 6e-3
    assert abs(frac - expect) <= 0.2 * expect


def test_boundary_fraction_box():
    from mirrormfld.geometry import BoxLogBarrierMap
    box = BoxLogBarrierMap(bounds=((0.0, 1.0), (0.0, 2.0)))
    pts = np.array([[0.5, 1.0], [0.0005, 1.0], [0.9999, 0.5]])
    assert boundary_fraction(pts, box, 1e-3) == pytest.approx(2 / 3)


# -- run_experiment --------------------------------------------------------------

def test_run_writes_expected_files(tmp_path):
    res = run_experiment(small_config(tmp_path))
    assert res.metrics_path.exists()
    assert res.summary_path.exists()
    assert res.particles_path is None
    summary = load_summary(res.summary_path)
    assert summary["iterations"] == 6
    assert summary["config"]["sampler"]["particles"] == 64
    assert summary["final_objective"] == pytest.approx(res.metrics[-1].objective_value)


def test_metrics_csv_schema(tmp_path):
    res = run_experiment(small_config(tmp_path))
    rows = read_rows(res.metrics_path)
    assert rows[0] == metrics_header(3)
    assert rows[0] == ["iteration", "objective", "boundary_fraction",
                       "mean_0", "mean_1", "mean_2",
                       "coord_min", "coord_max", "wall_ms"]
    assert len(rows) == 1 + 7  # header + iterations 0..6
    assert [r[0] for r in rows[1:]] == [str(k) for k in range(7)]


def test_metrics_golden_file(tmp_path):
    # pinned-schema golden: columns exact, values reproduced within 1e-12
    res = run_experiment(small_config(tmp_path, seed=7))
    got = read_rows(res.metrics_path)
    golden = read_rows("tests/data/golden_metrics.csv")
    assert got[0] == golden[0]
    assert len(got) == len(golden)
    for grow, row in zip(golden[1:], got[1:]):
        assert row[0] == grow[0]
        for g, v in zip(grow[1:-1], row[1:-1]):  # wall_ms excluded
            assert float(v) == pytest.approx(float(g), abs=1e-12)


def test_dump_particles(tmp_path):
    res = run_experiment(small_config(tmp_path, **{"output.dump_particles": True}))
    rows = read_rows(res.particles_path)
    assert rows[0] == ["x_0", "x_1", "x_2"]
    assert len(rows) == 1 + 64
    pts = np.array([[float(v) for v in r] for r in rows[1:]])
    assert np.allclose(pts.sum(axis=1), 1.0, atol=1e-12)


def test_identical_runs_byte_identical_excluding_wall_clock(tmp_path):
    a = run_experiment(small_config(tmp_path / "a", seed=5))
    b = run_experiment(small_config(tmp_path / "b", seed=5))

    def stripped(path):
        return [row[:-1] for row in read_rows(path)]

    assert stripped(a.metrics_path) == stripped(b.metrics_path)
    sa, sb = a.summary, b.summary
    for volatile in ("runtime_s",):
        sa = {k: v for k, v in sa.items() if k != volatile}
        sb = {k: v for k, v in sb.items() if k != volatile}
    sa["config"]["output"].pop("dir"), sb["config"]["output"].pop("dir")
    assert json.dumps(sa, sort_keys=True) == json.dumps(sb, sort_keys=True)


def test_worker_count_does_not_change_metrics(tmp_path):
    a = run_experiment(small_config(tmp_path / "w1", seed=3), workers=1)
    b = run_experiment(small_config(tmp_path / "w8", seed=3), workers=8)
    rows_a = [row[:-1] for row in read_rows(a.metrics_path)]
    rows_b = [row[:-1] for row in read_rows(b.metrics_path)]
    assert rows_a == rows_b


def test_projected_run_and_compare(tmp_path):
    mm = run_experiment(small_config(tmp_path, seed=1))
    pr = run_experiment(small_config(tmp_path, seed=1, **{"sampler.kind":
                                                          "projected-mfld"}))
    report = compare_runs(mm.summary, pr.summary)
    assert {r["label"] for r in report["runs"]} == {"mmfld_seed1",
                                                    "projected-mfld_seed1"}
    assert report["winner_final_objective"] in ("mmfld_seed1", "projected-mfld_seed1")
    identical = compare_runs(mm.summary, mm.summary)
    assert identical["runs"][1]["objective_delta"] == 0.0


def test_compare_rejects_mismatched_objectives(tmp_path):
    a = run_experiment(small_config(tmp_path / "x"))
    raw = figure1_config(beta=1e-4, particles=64, steps=3,
                         out_dir=str(tmp_path / "y"))
    b = run_experiment(parse_config(json.dumps(raw)))
    with pytest.raises(MismatchedObjectiveError):
        compare_runs(a.summary, b.summary)
