"""Drift library: singular power-law interaction, sine-driven interaction and
smooth baselines with closed-form averages.

All drift callables are batched over states, see :mod:`ddsde_avg.model`.
"""
from dataclasses import dataclass
import math
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import SingularEvaluationError
from .model import OscillatingDriftSpec

# envelope factor for alpha1 == 1; valid for T >= e (ln(1+T) <= ln(1+e) ln T there)
LOG_CASE_FACTOR = math.log1p(math.e)


@dataclass(frozen=True)
class PowerKernelParams:
    alpha1: float
    alpha2: float
    truncation_delta: float = 0.0

    def validate(self, d):
        if not self.alpha1 > 0:
            raise ValueError("alpha1 must be positive")
        upper = min(2.0, 1.0 + d / 2.0)
        if not 1.0 < self.alpha2 < upper:
            raise ValueError(f"alpha2 must lie in (1, {upper:g}) for d={d}")
        if self.truncation_delta < 0:
            raise ValueError("truncation_delta must be nonnegative")


def default_truncation(n_particles, d):
    return n_particles ** (-1.0 / d) / 10.0


def power_omega(alpha1):
    if alpha1 == 1.0:
        return lambda T: math.log(T) / T
    a = min(alpha1, 1.0)
    return lambda T: T ** (-a)


def _interaction(params, X, mu):
    out, bad = kernels.power_kernel_sum(X, mu.particles, mu.weights, params.alpha2, params.truncation_delta)
    if bad >= 0:
        raise SingularEvaluationError(
            f"power kernel evaluated at a coincident point (row {bad}) without truncation", particle=bad
        )
    return out


def power_kernel_drift(params, d):
    """Oscillating power-law interaction ``[(1+t)^-a1 + 1] * int (x-y)/|x-y|^a2 mu(dy)``."""
    params.validate(d)
    a1 = params.alpha1
    delta = params.truncation_delta
    if a1 == 1.0:
        factor = LOG_CASE_FACTOR
    else:
        factor = 1.0 / abs(1.0 - a1)

    def fast(t, X, mu):
        return ((1.0 + t) ** (-a1) + 1.0) * _interaction(params, X, mu)

    def averaged(X, mu):
        return _interaction(params, X, mu)

    def envelope(X, mu):
        diff = X[:, None, :] - mu.particles[None, :, :]
        r = np.linalg.norm(diff, axis=-1)
        with np.errstate(divide="ignore"):
            term = r * np.maximum(r, delta) ** (-params.alpha2)
        term = np.where(r > 0, term, 0.0 if delta > 0 else np.inf)
        return factor * (term @ mu.weights)

    p0 = d / (params.alpha2 - 1.0)
    return OscillatingDriftSpec(
        dim=d,
        fast_drift=fast,
        averaged_drift=averaged,
        omega=power_omega(a1),
        envelope=envelope,
        # the example sits in every p0 below d/(alpha2-1); keep the open endpoint as metadata
        p0=math.nextafter(p0, 0.0),
        name="power_kernel",
        meta={"alpha1": a1, "alpha2": params.alpha2, "truncation_delta": delta, "p0_supremum": p0},
    )


@dataclass(frozen=True)
class OscillatoryInteractionParams:
    """``F(u, v)`` maps ``u`` in [-1, 1] and ``v`` of shape ``(n, m)`` to ``(n, d)``;
    ``phi(X, Y)`` maps ``(n, d)``, ``(k, d)`` to ``(n, k, m)``."""

    F: Callable
    phi: Callable
    nu_atoms: Sequence
    L_F: float
    m: int = 1

    def validate(self):
        if not self.L_F > 0:
            raise ValueError("L_F must be positive")
        if len(self.nu_atoms) == 0:
            raise ValueError("nu needs at least one atom")
        for xi, w in self.nu_atoms:
            if w < 0:
                raise ValueError("atom masses must be nonnegative")

    @property
    def inverse_frequency_mass(self):
        return sum(w / abs(xi) for xi, w in self.nu_atoms if xi != 0)


def check_lipschitz(params, d, n_probe=64, seed=0):
    """Probe ``|F(u,0)| <= L_F`` and Lipschitz continuity in ``v`` on random points."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, n_probe)
    v = rng.standard_normal((n_probe, params.m)) * 3
    w = rng.standard_normal((n_probe, params.m)) * 3
    ok = True
    for i in range(n_probe):
        f0 = params.F(u[i], np.zeros((1, params.m)))[0]
        fv = params.F(u[i], v[i:i + 1])[0]
        fw = params.F(u[i], w[i:i + 1])[0]
        ok &= np.linalg.norm(f0) <= params.L_F * (1 + 1e-12)
        ok &= np.linalg.norm(fv - fw) <= params.L_F * np.linalg.norm(v[i] - w[i]) * (1 + 1e-12) + 1e-15
    return bool(ok)


PERIODIC_NODES = 64


def oscillatory_interaction_drift(params, d):
    """Sine-driven interaction ``sum_i w_i F(sin(xi_i t), int phi(x, y) mu(dy))``."""
    params.validate()
    atoms = [(float(xi), float(w)) for xi, w in params.nu_atoms]
    mass_nonzero = sum(w for xi, w in atoms if xi != 0)
    mass_zero = sum(w for xi, w in atoms if xi == 0)
    inv_mass = params.inverse_frequency_mass
    taus = 2.0 * np.pi * np.arange(PERIODIC_NODES) / PERIODIC_NODES
    nonzero = [abs(xi) for xi, _ in atoms if xi != 0]

    def mean_field(X, mu):
        ph = np.asarray(params.phi(X, mu.particles), dtype=np.float64)
        return np.einsum("nkm,k->nm", ph, mu.weights)

    def fast(t, X, mu):
        v = mean_field(X, mu)
        out = np.zeros((X.shape[0], d))
        for xi, w in atoms:
            out += w * np.asarray(params.F(math.sin(xi * t), v), dtype=np.float64)
        return out

    def averaged(X, mu):
        v = mean_field(X, mu)
        acc = np.zeros((X.shape[0], d))
        for tau in taus:
            acc += np.asarray(params.F(math.sin(tau), v), dtype=np.float64)
        out = acc / PERIODIC_NODES * mass_nonzero
        if mass_zero:
            out = out + np.asarray(params.F(0.0, v), dtype=np.float64) * mass_zero
        return out

    def envelope(X, mu):
        ph = np.asarray(params.phi(X, mu.particles), dtype=np.float64)
        return 1.0 + np.linalg.norm(ph, axis=-1) @ mu.weights

    def omega(T):
        return 4.0 * math.pi * params.L_F / T * inv_mass

    return OscillatingDriftSpec(
        dim=d,
        fast_drift=fast,
        averaged_drift=averaged,
        omega=omega,
        envelope=envelope,
        name="oscillatory_interaction",
        period=2.0 * math.pi / max(nonzero) if nonzero else None,
        meta={"L_F": params.L_F, "nu_atoms": atoms, "inverse_frequency_mass": inv_mass},
    )


def sine_average_bound(params, T):
    """``4 pi L_F / T * sum_{xi != 0} w / |xi|``, computed from the parameters alone."""
    total = 0.0
    for xi, w in params.nu_atoms:
        if xi != 0:
            total += w / abs(xi)
    return 4.0 * math.pi * params.L_F * total / T


def difference_phi(X, Y):
    return X[:, None, :] - Y[None, :, :]


def tanh_difference_phi(X, Y):
    return np.tanh(X[:, None, :] - Y[None, :, :])


def random_lipschitz_F(rng, d, m):
    """Random ``F(u, v) = a cos(k u + c) + M tanh(v)`` and its Lipschitz constant."""
    a = rng.normal(size=d)
    k = rng.uniform(0.5, 4.0, size=d)
    c = rng.uniform(0, 2 * np.pi, size=d)
    M = rng.normal(size=(d, m))
    L_F = max(float(np.linalg.norm(a)), float(np.linalg.norm(M, 2)))

    def F(u, v):
        v = np.atleast_2d(v)
        return (a * np.cos(k * u + c))[None, :] + np.tanh(v) @ M.T

    return F, L_F


def sine_F(u, v):
    v = np.atleast_2d(v)
    return np.full((v.shape[0], v.shape[1]), u)


def sine_squared_F(u, v):
    v = np.atleast_2d(v)
    return np.full((v.shape[0], v.shape[1]), u * u)


def sine_plus_tanh_F(u, v):
    v = np.atleast_2d(v)
    return u + np.tanh(v)


def smooth_baseline_drift(kind, d):
    """Smooth test drifts: ``mean_reversion`` (measure dependent) or ``sine_modulated``."""
    if kind == "mean_reversion":

        def fast(t, X, mu):
            return (1.0 + math.cos(t)) * (mu.mean()[None, :] - X)

        def averaged(X, mu):
            return mu.mean()[None, :] - X

        def envelope(X, mu):
            return np.linalg.norm(mu.mean()[None, :] - X, axis=-1)

        return OscillatingDriftSpec(
            dim=d, fast_drift=fast, averaged_drift=averaged, omega=lambda T: 2.0 / T,
            envelope=envelope, name=kind, period=2.0 * math.pi,
        )
    if kind == "sine_modulated":

        def fast(t, X, mu):
            return math.sin(t) * np.tanh(X)

        def averaged(X, mu):
            return np.zeros_like(X)

        def envelope(X, mu):
            return np.linalg.norm(np.tanh(X), axis=-1)

        return OscillatingDriftSpec(
            dim=d, fast_drift=fast, averaged_drift=averaged, omega=lambda T: 2.0 / T,
            envelope=envelope, name=kind, period=2.0 * math.pi, measure_dependent=False,
        )
    raise ValueError(f"unknown baseline kind {kind!r}; expected 'mean_reversion' or 'sine_modulated'")


def freeze_to_average(spec):
    """Same spec with the oscillation removed: fast drift := averaged drift."""
    avg = spec.averaged_drift

    def fast(t, X, mu):
        return avg(X, mu)

    return OscillatingDriftSpec(
        dim=spec.dim, fast_drift=fast, averaged_drift=avg, omega=lambda T: 0.0,
        envelope=spec.envelope, p0=spec.p0, kappa0=spec.kappa0, name=f"static_{spec.name}",
        period=None, measure_dependent=spec.measure_dependent, meta=dict(spec.meta),
    )


F_REGISTRY = {
    "sine": (sine_F, 1.0),
    "sine_squared": (sine_squared_F, 1.0),
    "sine_plus_tanh": (sine_plus_tanh_F, 1.0),
}
PHI_REGISTRY = {"difference": difference_phi, "tanh_difference": tanh_difference_phi}


def _parse_atoms(text):
    atoms = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        xi, _, w = part.partition(":")
        atoms.append((float(xi), float(w) if w else 1.0))
    return atoms


def build_drift(name, d, params=None, n_particles=1):
    """Build a registered example by name from a flat parameter mapping."""
    params = dict(params or {})
    if name == "power_kernel":
        delta = params.get("truncation_delta", "auto")
        delta = default_truncation(n_particles, d) if delta == "auto" else float(delta)
        return power_kernel_drift(
            PowerKernelParams(float(params.get("alpha1", 0.5)), float(params.get("alpha2", 1.5)), delta), d
        )
    if name == "oscillatory_interaction":
        F, L_F = F_REGISTRY[params.get("F", "sine_plus_tanh")]
        phi = PHI_REGISTRY[params.get("phi", "tanh_difference")]
        atoms = _parse_atoms(params.get("nu_atoms", "1:1"))
        return oscillatory_interaction_drift(OscillatoryInteractionParams(F, phi, atoms, L_F, m=d), d)
    if name in ("mean_reversion", "sine_modulated"):
        return smooth_baseline_drift(name, d)
    raise ValueError(f"unknown drift {name!r}; registered: {sorted(REGISTRY)}")


REGISTRY = ("power_kernel", "oscillatory_interaction", "mean_reversion", "sine_modulated")
