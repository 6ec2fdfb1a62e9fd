"""Particle samplers: mirror mean-field Langevin, projected baseline, plain MFLD.

The mirror sampler advances each particle through the dual space.  One
iteration, with statistics frozen at the current ensemble:

    y   <- forward(x_k) - eta * grad dF/dmu_k (x_k)          (full drift)
    y   <- K Euler-Maruyama substeps of the pure mirror diffusion
           dY = sqrt(2 * lambda * H(backward(Y))) dB  over the eta window
    x_{k+1} <- backward(y)

``backward`` is interior-valued, so iterates never leave the domain; the
particle positions themselves are never projected or clamped (dual
increments are tamed, see ``SamplerConfig``).  The projected baseline
instead works in ambient coordinates with isotropic noise and a Euclidean
projection after every update; the plain ``mfld`` sampler is the same
update without projection, for unconstrained sanity runs.

All per-particle noise comes from the counter-based streams in
``rngstream``, keyed by (seed, particle, iteration, substep): results are
independent of how particles are chunked across workers, and a fixed seed
reproduces a run bit-for-bit on the same platform.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rngstream
from .errors import SamplerError

Array = np.ndarray

SAMPLERS = ("mmfld", "projected-mfld", "mfld")

# Projected particles land exactly on the boundary, where barrier objectives
# blow up; they are nudged this far inside after each projection.
PROJECTION_NUDGE = 1e-6


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler selection and step parameters.

    ``dual_step_cap`` bounds each component of the dual drift and diffusion
    increments of the mirror sampler (tamed Euler).  The unbounded update is
    not representable in floating point: near a face the dual noise scale
    sqrt(2*lambda*eta/x) explodes, and a single kick underflows the softmax
    onto the exact boundary.  The cap binds only inside a boundary layer of
    thickness O(eta) -- at the shipped step sizes bulk increments sit two
    orders of magnitude below it -- so the discretization limit is
    unchanged.
    """

    sampler: str = "mmfld"
    eta: float = 1e-3
    temperature: float = 0.1
    substeps: int = 1
    steps: int = 0
    dual_step_cap: float = 4.0

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.eta < 0 or self.temperature < 0:
            raise ValueError("eta and temperature must be nonnegative")
        if self.substeps < 1 or self.steps < 0:
            raise ValueError("substeps must be >= 1 and steps >= 0")
        if not self.dual_step_cap > 0:
            raise ValueError("dual_step_cap must be positive")


@dataclass(frozen=True)
class ParticleEnsemble:
    """N particle rows plus the iteration counter and RNG lineage.

    ``points`` is (N, m) intrinsic for the mirror samplers and (N, d)
    ambient for the projected/plain ones.
    """

    points: Array
    iteration: int = 0
    seed: int = 0
    protocol: str = field(default=rngstream.PROTOCOL)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (N, dim) array")
        object.__setattr__(self, "points", pts)

    @property
    def n_particles(self) -> int:
        return self.points.shape[0]


def initial_ensemble(mirror_map, n: int, seed: int, *, ambient: bool = False) -> ParticleEnsemble:
    """Draw N independent starting points from the uniform law on the domain.

    Simplex: normalized exponentials (exponentials via inverse CDF to keep
    the draw within the one-word-per-value stream protocol), giving the
    uniform distribution on the simplex.  Box: uniform per coordinate.
    With ``ambient=True`` the simplex ensemble keeps all d coordinates,
    as the projected sampler expects; the underlying draws are identical,
    so mirror and projected runs share their initial particle sets.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if mirror_map.kind == "simplex-entropy":
        u = rngstream.uniform_block(seed, rngstream.INIT_ITERATION, 0, 0, n, mirror_map.ambient_dim)
        e = -np.log1p(-u)
        x = e / np.sum(e, axis=-1, keepdims=True)
        pts = x if ambient else x[:, :-1]
    else:
        u = rngstream.uniform_block(seed, rngstream.INIT_ITERATION, 0, 0, n, mirror_map.intrinsic_dim)
        pts = mirror_map.lower + u * (mirror_map.upper - mirror_map.lower)
    return ParticleEnsemble(points=pts, seed=seed)


def inner_diffusion(y: Array, mirror_map, temperature: float, eta: float,
                    substeps: int, draw, step_cap: float | None = None) -> Array:
    """Simulate the pure mirror diffusion over [0, eta] in K substeps.

    ``draw(substep)`` must return standard normals shaped like y.  Each of
    the K substeps of length h = eta/K adds ``L @ xi`` where L is the
    Cholesky factor of ``2 * temperature * h * H(x)`` at the current primal
    position x = backward(y); the dual Hessian inverse equals the primal
    Hessian there, so no matrix inversion occurs (and the Hessian is
    assembled straight from y, which stays accurate arbitrarily close to
    the boundary).  With ``step_cap`` set, increments are tamed and the
    simplex map switches to its exact near-face kernel inside the layer
    where the Euler kick is unresolvable -- see
    ``SimplexEntropyMap.diffusion_substep``.  The bare operation defaults
    to the untamed update.
    """
    if temperature == 0.0 or eta == 0.0:
        return y
    h = eta / substeps
    for s in range(substeps):
        y = mirror_map.diffusion_substep(y, 2.0 * temperature * h, draw(s),
                                         step_cap=step_cap)
    return y


def _chunk_ranges(n: int, chunks: int):
    chunks = max(1, min(chunks, n))
    edges = np.linspace(0, n, chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_chunks(fn, ranges, pool):
    if pool is None or len(ranges) == 1:
        for lo, hi in ranges:
            fn(lo, hi)
    else:
        list(pool.map(lambda r: fn(*r), ranges))


def _mirror_iteration(dual: Array, ambient: Array, mirror_map, objective,
                      cfg: SamplerConfig, seed: int, iteration: int,
                      *, pool=None, chunks: int = 1) -> tuple[Array, Array]:
    """One synchronous mirror iteration carried entirely in dual coordinates.

    Statistics are frozen at the incoming ensemble; every particle reads
    the same snapshot.  Working on (dual, ambient) pairs avoids the lossy
    primal round trip: reconstructing the pinned simplex coordinate from
    stored intrinsic floats bottoms out at machine epsilon, while the dual
    representation tracks particles within any positive distance of a face.
    """
    n, m = dual.shape
    stats = objective.stats(ambient)
    out_dual = np.empty_like(dual)
    out_ambient = np.empty_like(ambient)

    def update(lo, hi):
        grad = mirror_map.pullback(objective.potential_grad(ambient[lo:hi], stats))
        drift = np.clip(-cfg.eta * grad, -cfg.dual_step_cap, cfg.dual_step_cap)
        y = inner_diffusion(
            dual[lo:hi] + drift, mirror_map, cfg.temperature, cfg.eta, cfg.substeps,
            lambda s: rngstream.normal_block(seed, iteration, s, lo, hi, m),
            step_cap=cfg.dual_step_cap)
        out_dual[lo:hi] = y
        out_ambient[lo:hi] = mirror_map.ambient_from_dual(y)

    _run_chunks(update, _chunk_ranges(n, chunks), pool)
    return out_dual, out_ambient


def _intrinsic_view(ambient: Array, mirror_map) -> Array:
    if mirror_map.kind == "simplex-entropy":
        return ambient[..., :-1]
    return ambient


def mmfld_step(ensemble: ParticleEnsemble, mirror_map, objective, cfg: SamplerConfig,
               *, pool=None, chunks: int = 1) -> ParticleEnsemble:
    """One mirror step on intrinsic coordinates: forward, drift, diffuse, back."""
    pts = ensemble.points
    dual = mirror_map.forward(pts)
    ambient = mirror_map.embed(pts)
    _, ambient = _mirror_iteration(dual, ambient, mirror_map, objective, cfg,
                                   ensemble.seed, ensemble.iteration,
                                   pool=pool, chunks=chunks)
    return replace(ensemble, points=_intrinsic_view(ambient, mirror_map),
                   iteration=ensemble.iteration + 1)


def project_simplex(v: Array) -> Array:
    """Euclidean projection onto {x >= 0, sum x = 1} (sorted-threshold rule).

    Accepts a single vector or a stack of rows.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    rows = np.atleast_2d(v)
    d = rows.shape[1]
    s = np.sort(rows, axis=1)[:, ::-1]
    cumsum = np.cumsum(s, axis=1)
    ks = np.arange(1, d + 1)
    active = s * ks > (cumsum - 1.0)
    k_star = d - 1 - np.argmax(active[:, ::-1], axis=1)
    theta = (cumsum[np.arange(rows.shape[0]), k_star] - 1.0) / (k_star + 1)
    out = np.maximum(rows - theta[:, None], 0.0)
    return out[0] if single else out


def _project_ambient(pts: Array, mirror_map) -> Array:
    if mirror_map.kind == "simplex-entropy":
        proj = project_simplex(pts)
        # nudge off exact boundary so barrier objectives stay finite
        proj = np.maximum(proj, PROJECTION_NUDGE)
        return proj / np.sum(proj, axis=-1, keepdims=True)
    lo = mirror_map.lower + PROJECTION_NUDGE
    hi = mirror_map.upper - PROJECTION_NUDGE
    return np.clip(pts, lo, hi)


def euclidean_step(ensemble: ParticleEnsemble, mirror_map, objective, cfg: SamplerConfig,
                   *, pool=None, chunks: int = 1) -> ParticleEnsemble:
    """Ambient-coordinate Langevin update, projected back onto the domain.

    Implements both the projected baseline (``projected-mfld``) and the
    unconstrained sanity sampler (``mfld``); the only difference is whether
    the projection is applied.
    """
    pts = ensemble.points
    n, d = pts.shape
    stats = objective.stats(pts)
    k, seed = ensemble.iteration, ensemble.seed
    noise_scale = np.sqrt(2.0 * cfg.temperature * cfg.eta)
    project = cfg.sampler == "projected-mfld"
    out = np.empty_like(pts)

    def update(lo, hi):
        x = pts[lo:hi] - cfg.eta * objective.potential_grad(pts[lo:hi], stats)
        if noise_scale > 0.0:
            x = x + noise_scale * rngstream.normal_block(seed, k, 0, lo, hi, d)
        out[lo:hi] = _project_ambient(x, mirror_map) if project else x

    _run_chunks(update, _chunk_ranges(n, chunks), pool)
    return replace(ensemble, points=out, iteration=k + 1)


def projected_mfld_step(ensemble, mirror_map, objective, cfg, **kw) -> ParticleEnsemble:
    if cfg.sampler != "projected-mfld":
        cfg = replace(cfg, sampler="projected-mfld")
    return euclidean_step(ensemble, mirror_map, objective, cfg, **kw)


def run_sampler(ensemble: ParticleEnsemble, mirror_map, objective, cfg: SamplerConfig,
                *, diagnostics=None, every: int = 1, workers: int = 1):
    """Advance the ensemble cfg.steps times, collecting diagnostics rows.

    ``diagnostics(iteration, ensemble, ambient)`` is called on the initial
    state, at every ``every``-th iteration and on the final one; its return
    values are collected in order.  ``ambient`` is the full-coordinate view
    of the ensemble (for the mirror sampler it comes straight from the dual
    state, so it stays positive arbitrarily close to a face).  Step failures
    are re-raised as ``SamplerError`` with the offending iteration attached.
    The result is deterministic for fixed (seed, N, steps, substeps,
    sampler) and any worker count.
    """
    rows = []
    if cfg.steps == 0:
        return ensemble, rows
    if ensemble.iteration + cfg.steps >= rngstream.INIT_ITERATION:
        raise ValueError("iteration counter would collide with the init stream")
    mirror = cfg.sampler == "mmfld"
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if mirror:
            dual = mirror_map.forward(ensemble.points)
            ambient = mirror_map.embed(ensemble.points)
        else:
            ambient = ensemble.points
        if diagnostics is not None:
            rows.append(diagnostics(ensemble.iteration, ensemble, ambient))
        last = ensemble.iteration + cfg.steps
        while ensemble.iteration < last:
            k = ensemble.iteration
            try:
                if mirror:
                    dual, ambient = _mirror_iteration(
                        dual, ambient, mirror_map, objective, cfg,
                        ensemble.seed, k, pool=pool, chunks=workers)
                    ensemble = replace(ensemble,
                                       points=_intrinsic_view(ambient, mirror_map),
                                       iteration=k + 1)
                else:
                    ensemble = euclidean_step(ensemble, mirror_map, objective, cfg,
                                              pool=pool, chunks=workers)
                    ambient = ensemble.points
            except Exception as exc:
                raise SamplerError(k, str(exc)) from exc
            done = ensemble.iteration
            if diagnostics is not None and (done % every == 0 or done == last):
                rows.append(diagnostics(done, ensemble, ambient))
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return ensemble, rows
