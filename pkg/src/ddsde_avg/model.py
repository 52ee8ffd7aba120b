"""Drift, diffusion and measure types plus the averaging primitives.

Drift callables are batched: ``fast_drift(t, X, mu)`` receives states of
shape ``(n, d)`` and returns an ``(n, d)`` array; ``averaged_drift(X, mu)``
and ``envelope(X, mu)`` follow the same convention (the envelope returns
``(n,)``). The helper methods on :class:`OscillatingDriftSpec` also accept a
single ``(d,)`` state.
"""
from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, EvaluationError, ResolutionError

WEIGHT_TOL = 1e-12


class EmpiricalMeasure:
    """Finitely supported probability measure standing in for a law.

    Atoms are stored in a canonical (lexicographic) order so that any
    permutation of the input yields bit-identical drift evaluations.
    """

    __slots__ = ("particles", "weights")

    def __init__(self, particles, weights=None):
        pts = np.asarray(particles, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("an empirical measure needs at least one particle of shape (n, d)")
        n = pts.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != n:
                raise ValueError(f"got {w.shape[0]} weights for {n} particles")
            if (w < 0).any():
                raise ValueError("weights must be nonnegative")
            if abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if n > 1:
            if pts.shape[1] == 1 and weights is None:
                # ties are interchangeable here, so a plain sort is canonical
                pts = np.sort(pts, axis=0)
            else:
                keys = (w,) + tuple(pts[:, j] for j in range(pts.shape[1] - 1, -1, -1))
                order = np.lexsort(keys)
                pts = pts[order]
                w = w[order]
        pts.flags.writeable = False
        w.flags.writeable = False
        self.particles = pts
        self.weights = w

    @classmethod
    def from_unnormalized(cls, particles, weights):
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights must have a positive sum")
        return cls(particles, w / total)

    @classmethod
    def dirac(cls, point):
        return cls(np.atleast_2d(np.asarray(point, dtype=np.float64)))

    @property
    def size(self):
        return self.particles.shape[0]

    @property
    def dim(self):
        return self.particles.shape[1]

    def mean(self):
        return self.weights @ self.particles

    def __repr__(self):
        return f"EmpiricalMeasure(n={self.size}, d={self.dim})"


def _batched(x):
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


@dataclass(frozen=True)
class OscillatingDriftSpec:
    """A drift ``b(t, x, mu)`` together with its average and averaging modulus.

    ``omega`` and ``envelope`` quantify how fast the time average converges:
    ``|(1/T) int_t^{t+T} (b - b_avg) ds| <= omega(T) * envelope(x, mu)``.
    """

    dim: int
    fast_drift: Callable
    omega: Callable[[float], float]
    envelope: Callable
    averaged_drift: Optional[Callable] = None
    p0: float = math.inf
    kappa0: float = math.inf
    name: str = "custom"
    period: Optional[float] = None
    measure_dependent: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not self.p0 > max(self.dim, 2):
            raise ValueError(f"p0 must exceed max(d, 2) = {max(self.dim, 2)}, got {self.p0}")
        if self.kappa0 < 0:
            raise ValueError("kappa0 must be nonnegative")

    def fast(self, t, x, mu):
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self.fast_drift(t, _batched(x), mu), dtype=np.float64)
        return out[0] if x.ndim == 1 else out

    def averaged(self, x, mu):
        if self.averaged_drift is None:
            raise ConfigurationError(f"drift {self.name!r} has no averaged form")
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self.averaged_drift(_batched(x), mu), dtype=np.float64)
        return out[0] if x.ndim == 1 else out

    def envelope_at(self, x, mu):
        x = np.asarray(x, dtype=np.float64)
        out = np.asarray(self.envelope(_batched(x), mu), dtype=np.float64).reshape(-1)
        return float(out[0]) if x.ndim == 1 else out


def omega_is_admissible(spec, T_grid=None, tail_tol=1e-2):
    """True if omega is nonincreasing on a log grid and small at its far end."""
    if T_grid is None:
        T_grid = np.logspace(1, 8, 71)
    vals = np.array([spec.omega(float(T)) for T in T_grid])
    if not np.all(np.isfinite(vals)) or (vals < 0).any():
        return False
    nonincreasing = bool(np.all(np.diff(vals) <= 1e-15 * np.abs(vals[:-1])))
    return nonincreasing and vals[-1] <= tail_tol * max(vals[0], 1e-300)


def is_measure_independent(spec, x, mu1, mu2, times=(0.0, 0.7, 3.1)):
    """Check that the fast drift gives identical vectors under two measures."""
    return all(np.array_equal(spec.fast(t, x, mu1), spec.fast(t, x, mu2)) for t in times)


def numeric_average(spec, x, mu, t0, T_avg, quad_n):
    """Composite midpoint estimate of ``(1/T) int_{t0}^{t0+T} b(s, x, mu) ds``."""
    if not T_avg > 0:
        raise ValueError("T_avg must be positive")
    if quad_n < 2:
        raise ValueError("quad_n must be at least 2")
    if spec.period is not None and quad_n < 20.0 * T_avg / spec.period:
        raise ResolutionError(
            f"quad_n={quad_n} under-resolves period {spec.period:g} over T={T_avg:g}; "
            f"need at least {math.ceil(20.0 * T_avg / spec.period)} nodes"
        )
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    hstep = T_avg / quad_n
    acc = np.zeros(x.shape[1])
    for i in range(quad_n):
        s = t0 + (i + 0.5) * hstep
        v = np.asarray(spec.fast_drift(s, x, mu), dtype=np.float64)[0]
        if not np.all(np.isfinite(v)):
            raise EvaluationError(f"non-finite drift at quadrature node {i} (s={s!r})", node=i)
        acc += v
    return acc / quad_n


def kbm_deficiency(spec, x, mu, t0, T_avg, quad_n):
    """Euclidean norm of the windowed average of ``b - b_avg``."""
    if spec.averaged_drift is None:
        raise ConfigurationError(f"drift {spec.name!r} has no averaged form to compare against")
    avg = numeric_average(spec, x, mu, t0, T_avg, quad_n)
    return float(np.linalg.norm(avg - spec.averaged(np.asarray(x, dtype=np.float64), mu)))


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion coefficient ``sigma(x)`` with its ellipticity and Hölder data.

    ``sigma`` maps ``(n, d)`` states to ``(n, d, d)`` matrices. When
    ``matrix`` is set the coefficient is that constant matrix.
    """

    dim: int
    sigma: Optional[Callable] = None
    kappa1: float = 2.0
    beta_holder: float = 0.5
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.kappa1 > 1:
            raise ValueError("kappa1 must exceed 1")
        if not 0 < self.beta_holder < 1:
            raise ValueError("beta_holder must lie in (0, 1)")
        if self.sigma is None and self.matrix is None:
            raise ValueError("need either sigma or a constant matrix")
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=np.float64)
            if m.shape != (self.dim, self.dim):
                raise ValueError(f"matrix must be {self.dim}x{self.dim}")
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, dim, scale=1.0):
        s = abs(float(scale))
        kappa1 = max(1.5, s, 1.0 / s) if s > 0 else 1.5
        return cls(dim=dim, kappa1=kappa1, beta_holder=0.99, matrix=s * np.eye(dim))

    def sigma_at(self, X):
        X = _batched(X)
        if self.matrix is not None:
            return np.broadcast_to(self.matrix, (X.shape[0], self.dim, self.dim))
        return np.asarray(self.sigma(X), dtype=np.float64)

    def apply(self, X, dW):
        """Return ``sigma(X_i) @ dW_i`` row by row."""
        if self.matrix is not None:
            if self.dim == 1:
                return dW * self.matrix[0, 0]
            return dW @ self.matrix.T
        return np.einsum("nij,nj->ni", self.sigma_at(X), dW)


def check_ellipticity(diff, points, n_probes=16, seed=0):
    """Probe ``kappa1^-1 |xi| <= |sigma(x) xi| <= kappa1 |xi|`` at the given points."""
    rng = np.random.default_rng(seed)
    pts = _batched(points)
    S = diff.sigma_at(pts)
    xi = rng.standard_normal((n_probes, diff.dim))
    img = np.einsum("nij,kj->nki", S, xi)
    ratio = np.linalg.norm(img, axis=-1) / np.linalg.norm(xi, axis=-1)[None, :]
    lo, hi = 1.0 / diff.kappa1, diff.kappa1
    return bool(np.all(ratio >= lo * (1 - 1e-12)) and np.all(ratio <= hi * (1 + 1e-12)))


def cutoff(x, r=1.0):
    """Smooth bump: 1 on ``|x| <= r``, 0 on ``|x| >= 2r``; ``x`` has shape ``(..., d)``."""
    rad = np.linalg.norm(np.asarray(x, dtype=np.float64), axis=-1) / r
    s = np.clip(2.0 - rad, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g0 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        g1 = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return g0 / (g0 + g1)


def holder_window_constant(p_small, p_large, d, r=1.0):
    """Hölder constant between L^p norms on the cutoff support (ball of radius 2r)."""
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * (2.0 * r) ** d
    inv_large = 0.0 if math.isinf(p_large) else 1.0 / p_large
    return vol ** (1.0 / p_small - inv_large)


def default_centers(axes, r=1.0):
    lo = [float(a[0]) for a in axes]
    hi = [float(a[-1]) for a in axes]
    ticks = [np.arange(math.floor(a / r) * r, b + 0.5 * r, r) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*ticks, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def localized_lp_norm(values, axes, p, centers=None, r=1.0):
    """Grid estimate of ``sup_z || chi_r^z f ||_p``.

    ``values`` holds f on the tensor grid spanned by ``axes`` (uniformly
    spaced 1-D coordinate arrays, ``indexing='ij'``).
    """
    if not 1 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    values = np.asarray(values, dtype=np.float64)
    axes = [np.asarray(a, dtype=np.float64) for a in axes]
    if values.shape != tuple(len(a) for a in axes):
        raise ValueError("values shape does not match the grid axes")
    steps = [float(a[1] - a[0]) if len(a) > 1 else 1.0 for a in axes]
    if max(steps) > 0.25 * r:
        raise ResolutionError("grid too coarse to resolve the cutoff (need spacing <= r/4)")
    if centers is None:
        centers = default_centers(axes, r)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[0] == 0 or centers.size == 0:
        raise ValueError("centers must be a nonempty list of points")
    cell = float(np.prod(steps))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    absf = np.abs(values)
    best = 0.0
    for z in centers:
        chi = cutoff(mesh - z, r)
        mask = chi > 0
        if not mask.any():
            continue
        total = np.sum((chi[mask] * absf[mask]) ** p) * cell
        best = max(best, float(total ** (1.0 / p)))
    return best
