"""Error functionals: strong path error, empirical total variation and the
time-discretization fluctuation of a driftless diffusion."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ResolutionError
from .simulator import iter_driftless


@dataclass(frozen=True)
class ErrorSummary:
    estimate: float
    std_error: float
    n_replicas: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.estimate):
            raise ValueError("estimate must be finite")
        if not self.std_error >= 0:
            raise ValueError("std_error must be nonnegative")


def _mean_and_se(values):
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def strong_error(ens, ell=0.5):
    """Mean over replicas of the particle-averaged ``sup_k |X^eps_k - X_k|^(2 ell)``."""
    if not 0 < ell < 1:
        raise ValueError("ell must lie in (0, 1)")
    if ens.sup_gap.size == 0:
        raise ValueError("empty ensemble")
    per_replica = np.mean(ens.sup_gap ** (2.0 * ell), axis=1)
    mean, se = _mean_and_se(per_replica)
    return ErrorSummary(mean, se, int(per_replica.size), {"ell": ell, "grid": "full integration grid"})


def freedman_diaconis(pooled):
    """Per-coordinate Freedman-Diaconis width ``2 IQR n^(-1/3)`` of a pooled sample."""
    pooled = np.atleast_2d(np.asarray(pooled, dtype=np.float64).T).T
    q75, q25 = np.percentile(pooled, [75, 25], axis=0)
    width = 2.0 * (q75 - q25) * pooled.shape[0] ** (-1.0 / 3.0)
    span = np.ptp(pooled, axis=0)
    # degenerate spread: fall back to a width covering the range in ~sqrt(n) bins
    fallback = np.where(span > 0, span / math.sqrt(pooled.shape[0]), 1.0)
    return np.where(width > 0, width, fallback)


def _as_samples(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return a


def tv_histogram(samples_a, samples_b, bin_width="auto"):
    """Half the L1 distance between the two histograms on a shared lattice.

    The lattice is anchored at integer multiples of the bin width, so shifting
    both samples by a whole number of bins leaves the result unchanged.
    """
    a = _as_samples(samples_a)
    b = _as_samples(samples_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("both samples must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ValueError("samples differ in dimension")
    d = a.shape[1]
    if d > 3:
        raise ValueError(f"histogram TV supports d <= 3, got d={d}; use tv_lower_bound instead")
    if isinstance(bin_width, str):
        if bin_width != "auto":
            raise ValueError("bin_width must be positive or 'auto'")
        width = freedman_diaconis(np.concatenate([a, b]))
    else:
        width = np.broadcast_to(np.asarray(bin_width, dtype=np.float64), (d,))
        if not np.all(width > 0):
            raise ValueError("bin_width must be positive")
    ia = np.floor(a / width).astype(np.int64)
    ib = np.floor(b / width).astype(np.int64)
    lo = np.minimum(ia.min(axis=0), ib.min(axis=0))
    ia -= lo
    ib -= lo
    shape = np.maximum(ia.max(axis=0), ib.max(axis=0)) + 1
    flat_a = np.ravel_multi_index(ia.T, shape)
    flat_b = np.ravel_multi_index(ib.T, shape)
    size = int(np.prod(shape))
    if size <= 50_000_000:
        ca = np.bincount(flat_a, minlength=size)
        cb = np.bincount(flat_b, minlength=size)
        diff = ca / a.shape[0] - cb / b.shape[0]
    else:
        labels, inv = np.unique(np.concatenate([flat_a, flat_b]), return_inverse=True)
        ca = np.bincount(inv[: a.shape[0]], minlength=labels.size)
        cb = np.bincount(inv[a.shape[0]:], minlength=labels.size)
        diff = ca / a.shape[0] - cb / b.shape[0]
    return float(min(1.0, 0.5 * np.abs(diff).sum()))


def tv_lower_bound(samples_a, samples_b, test_functions):
    """``max_phi |E_a phi - E_b phi| / 2`` over functions bounded by 1: a lower bound on TV."""
    if len(test_functions) == 0:
        raise ValueError("need at least one test function")
    a = _as_samples(samples_a)
    b = _as_samples(samples_b)
    best = 0.0
    for phi in test_functions:
        va = np.asarray(phi(a), dtype=np.float64).reshape(-1)
        vb = np.asarray(phi(b), dtype=np.float64).reshape(-1)
        if np.abs(va).max() > 1 + 1e-12 or np.abs(vb).max() > 1 + 1e-12:
            raise ValueError("test functions must be bounded by 1 in absolute value")
        best = max(best, 0.5 * abs(va.mean() - vb.mean()))
    return float(min(best, 1.0))


def tanh_family(ks=(1.0, 4.0, 16.0), cs=None, coord=0):
    """Test functions ``tanh(k (x_coord - c))`` over a grid of slopes and centers."""
    if cs is None:
        cs = np.linspace(-3, 3, 25)
    return [
        (lambda X, k=k, c=c: np.tanh(k * (X[:, coord] - c)))
        for k in ks
        for c in cs
    ]


def fluctuation_functional(diff, f, h, cfg):
    """Monte Carlo ``E | int_0^T f(Z_t) - f(Z_{pi_h(t)}) dt |^2`` for the driftless diffusion.

    Left-endpoint Riemann sums on the ``dt`` grid; ``h`` must be a whole
    multiple of ``dt`` with ``dt <= h/10``. Each (replica, particle) path is
    one Monte Carlo sample.
    """
    if not h > 0:
        raise ValueError("mesh h must be positive")
    if cfg.dt > h / 10 * (1 + 1e-12):
        raise ResolutionError(f"dt={cfg.dt:g} exceeds h/10={h / 10:g}")
    m = int(round(h / cfg.dt))
    if abs(m * cfg.dt - h) > 1e-9 * h:
        raise ResolutionError("h must be an integer multiple of dt")
    n_paths = cfg.n_replicas * cfg.n_particles
    meta = {"h": h, "dt": cfg.dt, "T": cfg.T, "n_paths": n_paths}
    K = cfg.n_steps
    if m >= K:
        # pi_h is the identity on [0, h) and the grid ends before h
        return ErrorSummary(0.0, 0.0, n_paths, meta)
    acc = np.zeros(n_paths)
    anchor = None
    for k, X in iter_driftless(cfg, diff):
        if k == K:
            break
        fx = np.asarray(f(X.reshape(n_paths, -1)), dtype=np.float64).reshape(-1)
        # on mesh points and on [0, h) the projection is the identity
        if k % m == 0:
            anchor = fx
        elif k > m:
            acc += fx - anchor
    values = (acc * cfg.dt) ** 2
    mean, se = _mean_and_se(values)
    return ErrorSummary(mean, se, n_paths, meta)


FUNCTIONS = {
    "indicator": lambda X: (X[:, 0] > 0).astype(np.float64),
    "tanh": lambda X: np.tanh(X[:, 0]),
    "constant": lambda X: np.ones(X.shape[0]),
}
