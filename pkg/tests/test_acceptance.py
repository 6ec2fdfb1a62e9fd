"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.  The heavy particle runs (criteria 3, 4/7, 6, 8, 10)
share session fixtures where the criteria share runs.

Criterion 6a's final-loss clause at beta = 0 is expected to fail: with both
samplers sharing the continuous-time minimizer, projection's boundary
sticking strictly lowers the mean-matching loss at stationarity, so the
asserted ordering cannot hold for a faithful baseline (measurements across
four targets, three step sizes and three seeds in the decisions ledger).
The criterion is asserted as stated rather than weakened.
"""
import json
import time

import numpy as np
import pytest
from scipy.special import gammaln

from mirrormfld import rngstream, theory
from mirrormfld.config import figure1_config, dirichlet_config, parse_config
from mirrormfld.dynamics import SamplerConfig, initial_ensemble, run_sampler
from mirrormfld.geometry import BoxLogBarrierMap, SimplexEntropyMap
from mirrormfld.objectives import (
    LinearPotential,
    MeanMatchBarrier,
    NetworkRisk,
    first_variation_grad,
    lift_identity_check,
)
from mirrormfld.oracle import (
    build_grid,
    entropy_sandwich_check,
    fixed_point_solve,
    grid_functionals,
    measure_from_weights,
)
from mirrormfld.runner import compare_runs, run_experiment

Q = (0.5, 0.3, 0.2)
LAM = 0.1


def report(num, name, ok, detail=""):
    print(f"\n[ACCEPTANCE {num}] {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


# -- shared heavy fixtures ------------------------------------------------------

@pytest.fixture(scope="session")
def mean_match_oracle():
    grid = build_grid(64, 1e-4)
    obj = MeanMatchBarrier(target=Q, beta=0.0)
    result = fixed_point_solve(grid, obj, LAM, damping=0.5, tol=1e-8)
    fun = grid_functionals(grid, obj, result.measure, LAM)
    return grid, obj, result, fun


@pytest.fixture(scope="session")
def oracle_consistency_run(tmp_path_factory):
    """Criterion 4's MMFLD run, shared with criterion 7 (its gap series)."""
    out = tmp_path_factory.mktemp("criterion4")
    cfg = parse_config(json.dumps(
        figure1_config(beta=0.0, particles=10_000, steps=2000, seed=0,
                       out_dir=str(out))))
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def figure1_runs(tmp_path_factory):
    """All figure-1 A/B runs: (beta, sampler, seed) -> summary."""
    out = tmp_path_factory.mktemp("figure1")
    runs = {}
    t0 = time.perf_counter()
    for beta in (0.0, 1e-4):
        for sampler in ("mmfld", "projected-mfld"):
            for seed in (0, 1, 2):
                cfg = parse_config(json.dumps(figure1_config(
                    beta=beta, sampler=sampler, seed=seed, particles=10_000,
                    steps=2000, out_dir=str(out / f"{beta}_{sampler}_{seed}"))))
                runs[(beta, sampler, seed)] = run_experiment(cfg).summary
    return runs, time.perf_counter() - t0


# -- criterion 1: mirror-map identity suite --------------------------------------

def test_criterion_01_mirror_map_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    simplex = SimplexEntropyMap(ambient_dim=3)
    box = BoxLogBarrierMap(bounds=((-1.0, 2.0), (0.0, 1.0)))

    pts_s = rng.dirichlet((1.0, 1.0, 1.0), size=1000)[:, :2]
    lo, hi = box.lower, box.upper
    pts_b = lo + rng.random((1000, 2)) * (hi - lo)

    round_trip = {}
    for name, mm, pts in (("simplex", simplex, pts_s), ("box", box, pts_b)):
        round_trip[name] = float(np.max(np.abs(mm.backward(mm.forward(pts)) - pts)))
        assert round_trip[name] <= 1e-10

        y = rng.uniform(-20, 20, size=(1000, mm.intrinsic_dim))
        back = mm.backward(y)
        err = np.max(np.abs(mm.forward(back) - y), axis=-1)
        if name == "simplex":
            # reduced coordinates cannot encode the pinned coordinate below
            # machine epsilon: the attainable error there is eps/x_d (ledger)
            smallest = np.min(mm.embed(back), axis=-1)
            assert np.all(err <= np.maximum(1e-8, 8 * np.finfo(float).eps / smallest))
            assert np.max(err[smallest >= 1e-7]) <= 1e-8
        else:
            assert np.max(err) <= 1e-8

        # Hessian-inverse identity via finite differences of backward
        for x in pts[:50] if name == "box" else pts_s[pts_s.min(1) > 0.02][:50]:
            yx = mm.forward(x)
            m = x.size
            fd = np.zeros((m, m))
            h = 1e-6
            for c in range(m):
                e = np.zeros(m)
                e[c] = h
                fd[:, c] = (mm.backward(yx + e) - mm.backward(yx - e)) / (2 * h)
            hess = mm.hessian(x)
            assert np.max(np.abs(hess @ fd - np.eye(m))) <= 1e-4
    elapsed = time.perf_counter() - t0
    assert report(1, "mirror-map identity suite",
                  elapsed < 5.0, f"round trips {round_trip}, {elapsed:.2f}s")


# -- criterion 2: gradient oracles ------------------------------------------------

def test_criterion_02_gradient_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    simplex = SimplexEntropyMap(ambient_dim=3)
    pbox = BoxLogBarrierMap(bounds=((-3.0, 3.0),) * 3)
    net = NetworkRisk(features=rng.normal(size=(3, 2)), labels=rng.normal(size=3))
    cases = [
        (LinearPotential(alpha=(2.0, 3.0, 1.5), reference_temperature=LAM), simplex),
        (MeanMatchBarrier(target=Q, beta=1e-4), simplex),
        (net, pbox),
    ]
    worst = 0.0
    for obj, mm in cases:
        for _ in range(20):
            if mm is simplex:
                pts = rng.dirichlet((3.0, 3.0, 3.0), size=4)[:, :2]
            else:
                pts = rng.uniform(-2.0, 2.0, size=(4, 3))
            for i in range(4):
                dev = lift_identity_check(obj, pts, mm, i)
                worst = max(worst, dev)
                assert dev <= 1e-5
                # gradient magnitude sanity: analytic vs FD relative scale
                stats = obj.stats(mm.embed(pts))
                g = first_variation_grad(obj, pts[i], stats, mm)
                assert np.all(np.isfinite(g))
    elapsed = time.perf_counter() - t0
    assert report(2, "gradient-oracle suite", elapsed < 10.0,
                  f"worst lift deviation {worst:.2e}, {elapsed:.2f}s")


# -- criterion 3: Dirichlet stationarity -------------------------------------------

def test_criterion_03_dirichlet_stationarity(tmp_path):
    t0 = time.perf_counter()
    cfg = parse_config(json.dumps(dirichlet_config(out_dir=str(tmp_path))))
    assert cfg.sampler.particles == 50_000 and cfg.sampler.steps == 5000
    res = run_experiment(cfg)
    mean = np.asarray(res.summary["mean"])
    var = np.asarray(res.summary["variance"])
    target_var = 8.0 / 252.0
    mean_err = np.max(np.abs(mean - 1 / 3))
    var_err = np.max(np.abs(var - target_var) / target_var)
    elapsed = time.perf_counter() - t0
    ok = mean_err < 0.01 and var_err < 0.15
    assert report(3, "Dirichlet stationarity", ok,
                  f"|mean-1/3| {mean_err:.4f} (<0.01), var rel err {var_err:.3f} "
                  f"(<0.15), {elapsed:.0f}s")


# -- criteria 4 and 7: oracle consistency and convergence trend ---------------------

def test_criterion_04_oracle_consistency(mean_match_oracle, oracle_consistency_run):
    grid, obj, result, fun = mean_match_oracle
    res, elapsed = oracle_consistency_run
    assert result.residual < 1e-6
    mean = np.asarray(res.summary["mean"])
    diff = np.abs(mean - fun.mean)
    ok = bool(np.all(diff < 0.02)) and elapsed < 120
    assert report(4, "oracle consistency", ok,
                  f"residual {result.residual:.1e}, mean diff {np.round(diff, 4)}, "
                  f"{elapsed:.0f}s")


def test_criterion_07_linear_convergence_trend(mean_match_oracle,
                                               oracle_consistency_run):
    _, _, _, fun = mean_match_oracle
    res, _ = oracle_consistency_run
    gaps = np.array([row.objective_value for row in res.metrics]) - fun.value
    assert gaps.shape[0] == 2001
    ratio = gaps[-1] / gaps[0]
    # smooth with a 10-iteration moving average; "up to Monte-Carlo noise"
    # is quantified as 5x the plateau's increment deviation (extreme-value
    # calibrated: the max of ~1800 near-Gaussian increments reaches ~3.4 sigma)
    smooth = np.convolve(gaps, np.ones(10) / 10, mode="valid")
    inc = np.diff(smooth)
    slack = max(5.0 * float(np.std(inc[-len(inc) // 4:])), 1e-12)
    worst = float(np.max(inc[200:]))
    ok = gaps[-1] < 0.1 * gaps[0] and worst <= slack
    assert report(7, "linear-convergence trend", ok,
                  f"gap ratio {ratio:.4f} (<0.1), worst smoothed increment "
                  f"{worst:.2e} vs slack {slack:.2e}")


# -- criterion 5: entropy sandwich ---------------------------------------------------

def test_criterion_05_entropy_sandwich(mean_match_oracle):
    t0 = time.perf_counter()
    grid, _, _, _ = mean_match_oracle
    rng = np.random.default_rng(5)
    for beta in (0.0, 1e-4):
        obj = MeanMatchBarrier(target=Q, beta=beta)
        solution = fixed_point_solve(grid, obj, LAM).measure
        for _ in range(20):
            mu = measure_from_weights(grid, rng.exponential(size=grid.n_nodes))
            res = entropy_sandwich_check(grid, obj, LAM, mu, solution=solution,
                                         tol_scale=1e-3)
            assert res.passed, (res.lower, res.middle, res.upper)
    elapsed = time.perf_counter() - t0
    assert report(5, "entropy sandwich", elapsed < 30.0,
                  f"20 measures x both presets, {elapsed:.1f}s")


# -- criterion 6: figure-1 qualitative reproduction ----------------------------------

def test_criterion_06a_beta_zero(figure1_runs):
    runs, _ = figure1_runs
    lines = []
    loss_ok, frac_ok = True, True
    for seed in (0, 1, 2):
        mm = runs[(0.0, "mmfld", seed)]
        pr = runs[(0.0, "projected-mfld", seed)]
        verdict = compare_runs(mm, pr)
        loss_ok &= verdict["winner_final_objective"] == mm["label"]
        frac_ok &= (pr["final_boundary_fraction"]
                    >= 10.0 * mm["final_boundary_fraction"])
        lines.append(f"s{seed}: F {mm['final_objective']:.5f}/"
                     f"{pr['final_objective']:.5f} bf "
                     f"{mm['final_boundary_fraction']:.4f}/"
                     f"{pr['final_boundary_fraction']:.4f}")
    ok = loss_ok and frac_ok
    report(6, "figure-1 beta=0 (loss ordering + boundary ratio)", ok,
           "; ".join(lines))
    assert frac_ok, "projected boundary fraction should exceed 10x the mirror one"
    # Expected red: projection's boundary sticking lowers the mean-matching
    # loss below the free-energy optimum (see decisions ledger).
    assert loss_ok, "final F(MMFLD) < final F(projected) failed at beta=0"


def test_criterion_06b_barrier(figure1_runs):
    runs, elapsed = figure1_runs
    lines = []
    ok = True
    for seed in (0, 1, 2):
        mm = runs[(1e-4, "mmfld", seed)]
        pr = runs[(1e-4, "projected-mfld", seed)]
        verdict = compare_runs(mm, pr)
        ok &= verdict["winner_final_objective"] == mm["label"]
        lines.append(f"s{seed}: F {mm['final_objective']:.5f}/"
                     f"{pr['final_objective']:.5f}")
    ok = ok and elapsed < 300
    assert report(6, "figure-1 beta=1e-4 (loss ordering)", ok,
                  "; ".join(lines) + f", all 12 runs {elapsed:.0f}s")


# -- criterion 8: propagation-of-chaos trend ------------------------------------------

def test_criterion_08_propagation_of_chaos():
    t0 = time.perf_counter()
    theta = np.arange(8) * np.pi / 4
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    features = np.concatenate([0.7 * ring, 1.4 * ring])
    net = NetworkRisk(features=features, labels=np.zeros(16))
    box = BoxLogBarrierMap(bounds=((-3.0, 3.0),) * 3)
    cfg = SamplerConfig(sampler="mmfld", eta=0.1, temperature=0.1, steps=1500)

    def final_gap(n, seed):
        # zero labels + symmetric box: the minimizer is exactly symmetric,
        # F(mu*) = 0, so the settled F itself is the particle gap
        ens = initial_ensemble(box, n, seed=seed)
        tail = []
        def diag(k, e, amb):
            if k > 1000:
                tail.append(net.value(amb, net.stats(amb)))
        run_sampler(ens, box, net, cfg, diagnostics=diag, every=1)
        return float(np.mean(tail))

    gaps = {n: np.mean([final_gap(n, seed) for seed in (0, 1, 2)])
            for n in (1000, 4000, 16000)}
    elapsed = time.perf_counter() - t0
    ok = gaps[1000] >= gaps[4000] >= gaps[16000] and elapsed < 600
    detail = ", ".join(f"N={n}: {g:.3e} (N*gap {n * g:.3f})"
                       for n, g in gaps.items())
    assert report(8, "propagation-of-chaos trend", ok, detail + f", {elapsed:.0f}s")


# -- criterion 9: theory calculators ----------------------------------------------------

def test_criterion_09_theory_calculators():
    t0 = time.perf_counter()
    assert theory.step_bias(0.0, 1.0, 1.0, 1.0, 1, 1.0) == 0.0
    conv = theory.hessian_stability_factor(c1=0.0, c2=1.0, diameter=1.0, t=0.5,
                                           drift_bound=1.0, dim=1)
    assert conv.expectation == 1.0 and conv.regime == "convention"
    # the formula's small-window limit is 1; its leading correction
    # 4*c1*sqrt(t*d) equals 4.0e-4 at t=1e-8, so the 1e-4 check runs at
    # t=1e-12 and the spec's t=1e-8 value is frozen instead (ledger)
    small = theory.hessian_stability_factor(c1=1.0, c2=1.0, diameter=1.0,
                                            t=1e-12, drift_bound=1.0, dim=1)
    assert abs(small.expectation - 1.0) <= 1e-4
    frozen = theory.hessian_stability_factor(c1=1.0, c2=1.0, diameter=1.0,
                                             t=1e-8, drift_bound=1.0, dim=1)
    assert frozen.expectation == pytest.approx(1.0004001400440132, rel=1e-12)
    limit = theory.objective_gap_bound(1.0, 1.0, LAM, 3e-3, 10**9, 50_000,
                                       1.0, 1.0, 0.0)
    assert limit == pytest.approx(1e-5, rel=1e-9)
    elapsed = time.perf_counter() - t0
    assert report(9, "theory calculators", elapsed < 1.0, f"{elapsed:.2f}s")


# -- criterion 10: determinism across workers --------------------------------------------

def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()

    def run(tag, workers):
        cfg = parse_config(json.dumps(figure1_config(
            beta=0.0, particles=10_000, steps=2000, seed=0,
            out_dir=str(tmp_path / tag))))
        res = run_experiment(cfg, workers=workers)
        lines = res.metrics_path.read_text(encoding="utf-8").splitlines()
        # strip the wall-clock column, keep everything else byte-identical
        return [line.rsplit(",", 1)[0] for line in lines]

    first = run("w1", 1)
    again = run("w1b", 1)
    eight = run("w8", 8)
    elapsed = time.perf_counter() - t0
    ok = first == again == eight
    assert report(10, "determinism across repeats and worker counts", ok,
                  f"{len(first)} csv rows compared, {elapsed:.0f}s")
