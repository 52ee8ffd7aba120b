"""Rate calculator for the averaging error bounds.

The bounds have the shape ``inf_h (h^g + omega(h/eps))`` (law distance) and
``inf_h (omega(h/eps)^2 + h^g)^ell`` (path moment). For power-law
``omega(t) = t^-alpha`` the infimum scales like a power of ``eps``; the
closed forms below return that power. They only use ``+ - * /`` so
``fractions.Fraction`` inputs give exact rational results.
"""
from dataclasses import dataclass
import math
from typing import NamedTuple, Union
import warnings

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
LOG_MODE = "log"
DEFAULT_LOG_EPS = 2.0 ** -20


class RateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RateParams:
    """``alpha`` is the power of ``omega(t) = t^-alpha`` or ``"log"`` for ``ln(t)/t``."""

    alpha: Union[float, str]
    d: int
    p0: float = math.inf
    ell: float = 0.5
    delta: float = 0

    def __post_init__(self):
        if self.alpha != LOG_MODE and not self.alpha > 0:
            raise ValueError("alpha must be positive or 'log'")
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if not (self.p0 == math.inf or self.p0 > max(self.d, 2)):
            raise ValueError(f"p0 must exceed max(d, 2) = {max(self.d, 2)}")
        if not 0 < self.ell <= 1:
            raise ValueError("ell must lie in (0, 1]")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")

    @property
    def gamma(self):
        return 1 if self.p0 == math.inf else 1 - self.d / self.p0

    @property
    def beta_w(self):
        return self.gamma / 2

    @property
    def alpha_value(self):
        return 1 if self.alpha == LOG_MODE else self.alpha


def omega_power(alpha):
    return lambda t: t ** (-alpha)


def omega_log(t):
    """``ln(t)/t`` for ``t >= e``, continued as ``1/t`` below so it stays positive and decreasing."""
    return math.log(max(t, math.e)) / t


def _balance(a, g):
    return a * g / (a + g)


def weak_rate_exponent(rp, eps=None):
    """eps-exponent of ``inf_h (h^beta_w + (h/eps)^-alpha)``: ``alpha beta_w / (alpha + beta_w)``."""
    if rp.alpha == LOG_MODE:
        return _numeric_exponent(omega_log, rp.beta_w, eps, "weak")
    return _balance(rp.alpha, rp.beta_w)


def strong_rate_exponent(rp, mu_dependent=True, eps=None):
    """eps-exponent of ``inf_h ((h/eps)^-2alpha + h^g)^ell`` with ``g = gamma`` or ``1 - delta``."""
    g = rp.gamma if mu_dependent else 1 - rp.delta
    if rp.alpha == LOG_MODE:
        return rp.ell * _numeric_exponent(omega_log, g, eps, "strong")
    return rp.ell * _balance(2 * rp.alpha, g)


def _numeric_exponent(omega, g, eps, mode):
    eps = DEFAULT_LOG_EPS if eps is None else eps
    warnings.warn(
        f"log-type omega has no closed-form exponent; using ln(inf)/ln(eps) at eps={eps:g}",
        RateWarning, stacklevel=3,
    )
    res = inf_h_rate(omega, float(g), eps, mode)
    return math.log(res.value) / math.log(eps)


def closed_form_inf_h(alpha, g, eps, mode):
    """Exact minimizer and value of the power-law balance.

    weak:   ``min_h h^g + (h/eps)^-alpha``
    strong: ``min_h (h/eps)^-2alpha + h^g``
    """
    a = alpha if mode == "weak" else 2 * alpha
    h_star = ((a / g) * eps ** a) ** (1.0 / (a + g))
    value = h_star ** g + (h_star / eps) ** (-a)
    return h_star, value


class InfResult(NamedTuple):
    h_star: float
    value: float
    omega_monotone: bool


def golden_section(f, lo, hi, rel_tol=1e-8, max_iter=500):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rel_tol * max(1.0, abs(a) + abs(b)) / 2:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2
    fx = f(x)
    # the minimum may sit on the boundary
    for edge in (lo, hi):
        fe = f(edge)
        if fe < fx:
            x, fx = edge, fe
    return x, fx


def inf_h_rate(omega, gamma_exp, eps, mode):
    """Numerically minimize the bound over ``log h`` in ``[2 log eps, 0]``.

    weak: ``h^gamma_exp + omega(h/eps)``; strong: ``omega(h/eps)^2 + h^gamma_exp``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if mode not in ("weak", "strong"):
        raise ValueError("mode must be 'weak' or 'strong'")
    lo, hi = 2.0 * math.log(eps), 0.0
    probe = [omega(math.exp(u) / eps) for u in np.linspace(lo, hi, 201)]
    monotone = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(probe, probe[1:]))
    if not monotone:
        warnings.warn("omega is not nonincreasing on the probed grid", RateWarning, stacklevel=2)

    if mode == "weak":
        def objective(u):
            return math.exp(gamma_exp * u) + omega(math.exp(u) / eps)
    else:
        def objective(u):
            return omega(math.exp(u) / eps) ** 2 + math.exp(gamma_exp * u)

    u, val = golden_section(objective, lo, hi)
    return InfResult(math.exp(u), val, monotone)


def fit_rate(points):
    """OLS of ``ln(error)`` on ``ln(eps)``: returns ``(slope, intercept, r_squared)``."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least three (eps, error) points")
    eps = np.array([p[0] for p in pts], dtype=np.float64)
    err = np.array([p[1] for p in pts], dtype=np.float64)
    if (eps <= 0).any() or (err <= 0).any() or not np.all(np.isfinite(err)):
        raise ValueError("eps and error values must be positive and finite")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def example_power_kernel_exponents(alpha1, alpha2):
    """The two displayed exponents of the power-kernel example.

    law distance: ``a (2 - a2) / (2 + 2a - a2)``;
    path moment (ell = 1): ``(4a - 2 a a2) / (2 + 2a - a2)``, with ``a = min(a1, 1)``.
    """
    a = min(alpha1, 1)
    den = 2 + 2 * a - alpha2
    return a * (2 - alpha2) / den, (4 * a - 2 * a * alpha2) / den


def example_sine_interaction_exponents(d, p0):
    """Displayed exponents of the sine-driven example: ``1/3 - 2d/(9p0-3d)`` and ``2/3 (1 - 2d/(3p0-d))``."""
    from fractions import Fraction

    d, p0 = Fraction(d), Fraction(p0)
    third = Fraction(1, 3)
    return third - 2 * d / (9 * p0 - 3 * d), 2 * third * (1 - 2 * d / (3 * p0 - d))


def rates_table(rp, eps_list, mu_dependent=True, alpha2=None):
    """Rows of exponents and optimal meshes; with ``alpha2`` also the limiting ``p0 = d/(alpha2-1)`` row."""
    rows = []
    variants = [(rp, "")]
    if alpha2 is not None:
        p_lim = rp.d / (alpha2 - 1.0)
        variants.append((RateParams(rp.alpha, rp.d, p_lim, rp.ell, rp.delta), "supremal, not attained"))
    for params, note in variants:
        weak = float(weak_rate_exponent(params))
        strong = float(strong_rate_exponent(params, mu_dependent))
        a = float(params.alpha_value)
        g_strong = float(params.gamma if mu_dependent else 1 - params.delta)
        for eps in eps_list:
            omega = omega_log if params.alpha == LOG_MODE else omega_power(a)
            hw = inf_h_rate(omega, float(params.beta_w), eps, "weak").h_star
            hs = inf_h_rate(omega, g_strong, eps, "strong").h_star
            rows.append({
                "alpha": params.alpha,
                "d": params.d,
                "p0": params.p0,
                "ell": params.ell,
                "delta": params.delta,
                "gamma": float(params.gamma),
                "beta_w": float(params.beta_w),
                "weak_exponent": weak,
                "strong_exponent": strong,
                "rms_order": strong / (2 * params.ell),
                "eps": eps,
                "h_star_weak": hw,
                "h_star_strong": hs,
                "note": note,
            })
    return rows
