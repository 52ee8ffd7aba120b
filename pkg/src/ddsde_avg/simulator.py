"""Synchronously coupled Euler-Maruyama for the oscillating and averaged particle systems.

Both systems start from the same initial particles and consume the same
Gaussian increments. Every increment is drawn from a counter-based stream
keyed by ``(seed, replica, particle, step)``, so results do not depend on
the number of worker threads or on the horizon.
"""
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import kernels
from .errors import DivergenceError, ResolutionError, SingularEvaluationError
from .model import EmpiricalMeasure

RESOLUTION_FACTOR = 20


@dataclass(frozen=True)
class InitialSampler:
    """Product-form law of the initial particles: ``point``, ``gaussian`` or ``uniform``."""

    kind: str = "gaussian"
    loc: float = 0.0
    scale: float = 1.0
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "gaussian", "uniform"):
            raise ValueError(f"unknown initial sampler {self.kind!r}")
        if self.kind == "gaussian" and not self.scale >= 0:
            raise ValueError("gaussian scale must be nonnegative")
        if self.kind == "uniform" and not self.high > self.low:
            raise ValueError("uniform box needs high > low")

    def sample(self, keys, d):
        n = keys.shape[0]
        loc = np.broadcast_to(np.asarray(self.loc, dtype=np.float64), (d,))
        if self.kind == "point":
            return np.tile(loc, (n, 1))
        if self.kind == "gaussian":
            return loc + np.asarray(self.scale, dtype=np.float64) * kernels.normals(keys, 0, d)
        return self.low + (self.high - self.low) * kernels.uniforms(keys, 0, d)


@dataclass(frozen=True)
class SimConfig:
    T: float
    dt: float
    epsilon: float = 1.0
    n_particles: int = 1
    n_replicas: int = 1
    seed: int = 0
    initial: InitialSampler = field(default_factory=InitialSampler)
    proj_mesh: float = None
    allow_underresolved: bool = False
    rescaled: bool = False
    record_every: int = 1
    record_times: tuple = ()
    threads: int = 1

    def __post_init__(self):
        if not self.T > 0 or not self.dt > 0:
            raise ValueError("T and dt must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n_particles < 1 or self.n_replicas < 1:
            raise ValueError("need at least one particle and one replica")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.proj_mesh is not None and not self.proj_mesh > 0:
            raise ValueError("proj_mesh must be positive")

    @property
    def n_steps(self):
        return int(math.floor(self.T / self.dt + 1e-9))

    @property
    def underresolved(self):
        return self.dt > self.epsilon / RESOLUTION_FACTOR * (1 + 1e-12)

    def recorded_steps(self):
        K = self.n_steps
        idx = set(range(0, K + 1, self.record_every))
        idx.update((0, K))
        for t in self.record_times:
            k = int(round(t / self.dt))
            if not 0 <= k <= K:
                raise ValueError(f"record time {t} outside [0, {K * self.dt}]")
            idx.add(k)
        return np.array(sorted(idx), dtype=np.int64)


def project_time(t, h):
    """Left projection onto the mesh ``h``: ``t`` on ``[0, h)``, ``k h`` on ``[k h, (k+1) h)``."""
    if not h > 0:
        raise ValueError("mesh h must be positive")
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t < h:
        return t
    k = math.floor(t / h)
    while (k + 1) * h <= t:
        k += 1
    while k * h > t:
        k -= 1
    return k * h


@dataclass
class CoupledEnsemble:
    """Recorded paths ``[replica][particle][time][dim]`` of both systems.

    ``sup_gap`` is ``max_k |X^eps_k - X_k|`` over the full integration grid,
    also when only a subset of times is recorded.
    """

    grid: np.ndarray
    steps: np.ndarray
    paths_eps: np.ndarray
    paths_avg: np.ndarray
    sup_gap: np.ndarray
    stream_ids: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_replicas(self):
        return self.paths_eps.shape[0]

    @property
    def n_particles(self):
        return self.paths_eps.shape[1]

    @property
    def dim(self):
        return self.paths_eps.shape[3]

    def at_time(self, t):
        """Pooled states of both systems at recorded time ``t``: two ``(R*N, d)`` arrays."""
        k = int(np.argmin(np.abs(self.grid - t)))
        if not math.isclose(self.grid[k], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"time {t} was not recorded")
        d = self.dim
        return self.paths_eps[:, :, k, :].reshape(-1, d), self.paths_avg[:, :, k, :].reshape(-1, d)


def _check_resolution(cfg):
    if cfg.underresolved and not cfg.allow_underresolved:
        raise ResolutionError(
            f"dt={cfg.dt:g} exceeds epsilon/{RESOLUTION_FACTOR}={cfg.epsilon / RESOLUTION_FACTOR:g}; "
            "set allow_underresolved to override"
        )


def _initial_states(cfg, replica, d):
    keys = kernels.stream_keys(cfg.seed, kernels.TAG_INIT, [replica], cfg.n_particles)[0]
    return cfg.initial.sample(keys, d)


def _run_replica(r, cfg, drift, diff, rec_steps, x0=None):
    d = drift.dim
    N = cfg.n_particles
    keys = kernels.stream_keys(cfg.seed, kernels.TAG_NOISE, [r], N)[0]
    xe = _initial_states(cfg, r, d) if x0 is None else np.array(x0, dtype=np.float64)
    xa = xe.copy()
    eps = cfg.epsilon
    dt = cfg.dt
    K = cfg.n_steps
    out_e = np.empty((N, len(rec_steps), d))
    out_a = np.empty_like(out_e)
    sup = np.zeros(N)
    j = 0
    if cfg.rescaled:
        ds = dt / eps
        drift_scale = eps * ds
        noise_scale = math.sqrt(eps) * math.sqrt(ds)
    else:
        drift_scale = dt
        noise_scale = math.sqrt(dt)
    fast, avg = drift.fast_drift, drift.averaged_drift
    for k in range(K + 1):
        if j < len(rec_steps) and rec_steps[j] == k:
            out_e[:, j] = xe
            out_a[:, j] = xa
            j += 1
        if k == K:
            break
        dW = noise_scale * kernels.normals(keys, k, d)
        s = k * (dt / eps) if cfg.rescaled else (k * dt) / eps
        try:
            be = fast(s, xe, EmpiricalMeasure(xe))
            ba = avg(xa, EmpiricalMeasure(xa))
        except SingularEvaluationError as exc:
            raise SingularEvaluationError(
                f"singular drift evaluation (replica {r}, particle {exc.particle}, step {k})",
                replica=r, particle=exc.particle, step=k,
            ) from exc
        xe = xe + be * drift_scale + diff.apply(xe, dW)
        xa = xa + ba * drift_scale + diff.apply(xa, dW)
        if not (np.isfinite(xe).all() and np.isfinite(xa).all()):
            raise DivergenceError(f"non-finite state in replica {r} at step {k + 1}", replica=r, step=k + 1)
        gap = xe - xa
        np.maximum(sup, np.sqrt(np.einsum("ij,ij->i", gap, gap)), out=sup)
    return out_e, out_a, sup


def simulate_coupled(cfg, drift, diff, initial_states=None):
    """Integrate the oscillating system (drift at ``t/eps``) and the averaged one side by side.

    ``initial_states`` optionally fixes the ``(N, d)`` starting particles of
    every replica instead of drawing them from ``cfg.initial``.
    """
    if drift.averaged_drift is None:
        raise ValueError(f"drift {drift.name!r} needs an averaged form for coupled simulation")
    if diff.dim != drift.dim:
        raise ValueError("drift and diffusion dimensions differ")
    _check_resolution(cfg)
    rec = cfg.recorded_steps()
    R, N, d = cfg.n_replicas, cfg.n_particles, drift.dim
    if initial_states is not None and np.shape(initial_states) != (N, d):
        raise ValueError(f"initial_states must have shape {(N, d)}")

    def work(r):
        return _run_replica(r, cfg, drift, diff, rec, initial_states)

    if cfg.threads > 1 and R > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(work, range(R)))
    else:
        results = [work(r) for r in range(R)]
    paths_eps = np.stack([res[0] for res in results])
    paths_avg = np.stack([res[1] for res in results])
    sup_gap = np.stack([res[2] for res in results])
    meta = {
        "seed": cfg.seed,
        "dt": cfg.dt,
        "epsilon": cfg.epsilon,
        "n_particles": N,
        "n_replicas": R,
        "T": cfg.T,
        "rescaled": cfg.rescaled,
        "underresolved_warning": bool(cfg.underresolved),
        "drift": drift.name,
        "delta_trunc": drift.meta.get("truncation_delta"),
        "backend": kernels.BACKEND,
    }
    return CoupledEnsemble(
        grid=rec * cfg.dt,
        steps=rec,
        paths_eps=paths_eps,
        paths_avg=paths_avg,
        sup_gap=sup_gap,
        stream_ids=np.arange(R),
        meta=meta,
    )


def iter_driftless(cfg, diff):
    """Yield ``(k, X_k)`` for ``Z = Z_0 + int sigma(Z) dW``; ``X_k`` has shape ``(R, N, d)``.

    The yielded array is reused between steps; copy it to keep it.
    """
    R, N, d = cfg.n_replicas, cfg.n_particles, diff.dim
    reps = np.arange(R)
    keys = kernels.stream_keys(cfg.seed, kernels.TAG_NOISE, reps, N)
    init_keys = kernels.stream_keys(cfg.seed, kernels.TAG_INIT, reps, N)
    X = cfg.initial.sample(init_keys.reshape(-1), d)
    sq = math.sqrt(cfg.dt)
    K = cfg.n_steps
    for k in range(K + 1):
        yield k, X.reshape(R, N, d)
        if k == K:
            return
        dW = sq * kernels.normals(keys, k, d).reshape(-1, d)
        X = X + diff.apply(X, dW)
        if not np.isfinite(X).all():
            raise DivergenceError(f"non-finite driftless state at step {k + 1}", step=k + 1)


def simulate_driftless(cfg, diff):
    """Recorded driftless paths, shape ``(R, N, n_recorded, d)``."""
    rec = cfg.recorded_steps()
    out = np.empty((cfg.n_replicas, cfg.n_particles, len(rec), diff.dim))
    j = 0
    for k, X in iter_driftless(cfg, diff):
        if j < len(rec) and rec[j] == k:
            out[:, :, j] = X
            j += 1
    return out


def with_epsilon(cfg, eps, dt=None):
    return replace(cfg, epsilon=eps, dt=cfg.dt if dt is None else dt)


def write_paths_csv(ens, path):
    """Dump recorded paths as ``replica, particle, time, system, x_1..x_d``."""
    d = ens.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "particle", "time", "system"] + [f"x_{i + 1}" for i in range(d)])
        for r in range(ens.n_replicas):
            for p in range(ens.n_particles):
                for system, arr in (("eps", ens.paths_eps), ("avg", ens.paths_avg)):
                    for k, t in enumerate(ens.grid):
                        w.writerow([r, p, f"{t:.17g}", system] + [f"{v:.17g}" for v in arr[r, p, k]])
