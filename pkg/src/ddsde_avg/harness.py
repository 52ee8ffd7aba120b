"""Experiment orchestration: config parsing, epsilon sweeps, check suites, reports.

Configs are INI files; every option is addressed by its flat key
``section.key`` (see :data:`SCHEMA`). Unknown keys are rejected.
"""
import configparser
from dataclasses import dataclass, field
import math
import os
import subprocess

import numpy as np

from . import __version__
from . import examples as ex
from .errors import ConfigurationError, DivergenceError, ResolutionError, SingularEvaluationError
from .metrics import FUNCTIONS, fluctuation_functional, strong_error, tanh_family, tv_histogram, tv_lower_bound
from .model import DiffusionSpec, EmpiricalMeasure, kbm_deficiency
from .rates import RateParams, fit_rate, rates_table, strong_rate_exponent, weak_rate_exponent
from .simulator import InitialSampler, SimConfig, simulate_coupled, write_paths_csv

KINDS = ("strong_study", "weak_study", "kbm_check", "fluct_check", "rates_table", "simulate")
REQUIRED = object()


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float(text):
    t = str(text).strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    return float(t)


def _float_list(text):
    return [_float(p) for p in str(text).replace(";", ",").split(",") if p.strip()]


def _float_or_auto(text):
    t = str(text).strip().lower()
    return "auto" if t == "auto" else _float(t)


def _alpha(text):
    t = str(text).strip().lower()
    return "log" if t == "log" else _float(t)


def _str(text):
    return str(text).strip()


def _checkpoints(text):
    t = str(text).strip().lower()
    return "default" if t == "default" else _float_list(t)


# flat key -> (parser, default)
SCHEMA = {
    "experiment.kind": (_str, REQUIRED),
    "experiment.seed": (int, REQUIRED),
    "experiment.output_dir": (_str, "out"),
    "experiment.threads": (int, 1),
    "drift.name": (_str, None),
    "drift.dim": (int, 1),
    "drift.alpha1": (_float, 0.5),
    "drift.alpha2": (_float, 1.5),
    "drift.truncation_delta": (_float_or_auto, "auto"),
    "drift.nu_atoms": (_str, "1:1"),
    "drift.F": (_str, "sine_plus_tanh"),
    "drift.phi": (_str, "tanh_difference"),
    "drift.static": (_bool, False),
    "diffusion.scale": (_float, 1.0),
    "sim.T": (_float, 1.0),
    "sim.dt": (_float, None),
    "sim.dt_ratio": (_float, None),
    "sim.epsilon": (_float, None),
    "sim.n_particles": (int, 1),
    "sim.n_replicas": (int, 1),
    "sim.initial": (_str, "gaussian"),
    "sim.initial_loc": (_float, 0.0),
    "sim.initial_scale": (_float, 1.0),
    "sim.initial_low": (_float, -1.0),
    "sim.initial_high": (_float, 1.0),
    "sim.record_every": (int, None),
    "sim.allow_underresolved": (_bool, False),
    "sim.rescaled": (_bool, False),
    "sim.proj_mesh": (_float, None),
    "sim.dump_paths": (_bool, False),
    "study.eps_grid": (_float_list, [2.0 ** -k for k in range(2, 8)]),
    "study.ell": (_float, 0.5),
    "study.checkpoints": (_checkpoints, "default"),
    "study.bin_width": (_float_or_auto, "auto"),
    "study.band": (_float, 0.1),
    "study.alpha": (_alpha, 1.0),
    "study.p0": (_float, math.inf),
    "study.delta": (_float, 0.0),
    "study.mu_dependent": (_str, "auto"),
    "study.test_family": (_str, "none"),
    "study.stability_check": (_bool, False),
    "kbm.n_samples": (int, 100),
    "kbm.T_grid": (_float_list, [5.0, 10.0, 20.0]),
    "kbm.t0_max": (_float, 50.0),
    "kbm.quad_per_unit": (_float, 200.0),
    "kbm.quad_min": (int, 2000),
    "kbm.tol": (_float, 1e-3),
    "kbm.atol": (_float, 1e-12),
    "kbm.mu_particles": (int, 20),
    "kbm.x_scale": (_float, 1.0),
    "fluct.h_grid": (_float_list, [2.0 ** -k for k in range(4, 11)]),
    "fluct.f": (_str, "indicator"),
    "fluct.dt_ratio": (_float, 10.0),
    "fluct.slope_min": (_float, 0.8),
    "fluct.slope_max": (_float, 1.2),
    "rates.alpha": (_alpha, 1.0),
    "rates.d": (int, 1),
    "rates.p0": (_float, math.inf),
    "rates.ell": (_float, 0.5),
    "rates.delta": (_float, 0.0),
    "rates.eps_list": (_float_list, [2.0 ** -k for k in (4, 8, 12)]),
    "rates.alpha2": (_float, None),
    "rates.mu_dependent": (_bool, True),
}

KIND_REQUIRES = {
    "strong_study": ("drift.name",),
    "weak_study": ("drift.name",),
    "kbm_check": ("drift.name",),
    "simulate": ("drift.name", "sim.epsilon"),
    "fluct_check": (),
    "rates_table": (),
}


@dataclass
class ExperimentSpec:
    kind: str
    seed: int
    output_dir: str
    threads: int
    eps_grid: list
    checkpoints: list
    values: dict
    raw: dict
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]


def _validate(values, raw):
    kind = values["experiment.kind"]
    if kind not in KINDS:
        raise ConfigurationError(f"experiment.kind must be one of {KINDS}, got {kind!r}")
    for key in KIND_REQUIRES[kind]:
        if key not in raw:
            raise ConfigurationError(f"missing required key {key!r} for kind {kind!r}")
    eps = values["study.eps_grid"]
    if any(e <= 0 for e in eps):
        raise ConfigurationError("study.eps_grid entries must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("study.eps_grid must be strictly decreasing")
    T = values["sim.T"]
    cps = values["study.checkpoints"]
    if cps == "default":
        cps = [T / 4, T / 2, 3 * T / 4, T]
    if any(not 0 <= c <= T for c in cps):
        raise ConfigurationError(f"study.checkpoints must lie in [0, sim.T={T}]")
    if values["sim.dt"] is None and values["sim.dt_ratio"] is None and kind in ("strong_study", "weak_study", "simulate"):
        raise ConfigurationError("set sim.dt or sim.dt_ratio")
    if values["study.mu_dependent"] not in ("auto", "true", "false"):
        raise ConfigurationError("study.mu_dependent must be auto, true or false")
    return cps


def spec_from_mapping(raw):
    """Build an :class:`ExperimentSpec` from flat ``section.key -> text`` pairs."""
    values = {}
    for key in raw:
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown configuration key {key!r}")
    for key, (parse, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigurationError(f"bad value for {key!r}: {exc}") from exc
        elif default is REQUIRED:
            raise ConfigurationError(f"missing required key {key!r}")
        else:
            values[key] = default
    cps = _validate(values, raw)
    return ExperimentSpec(
        kind=values["experiment.kind"],
        seed=values["experiment.seed"],
        output_dir=values["experiment.output_dir"],
        threads=values["experiment.threads"],
        eps_grid=list(values["study.eps_grid"]),
        checkpoints=list(cps),
        values=values,
        raw=dict(raw),
    )


def parse_config(path):
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            raw[f"{section}.{key}"] = value
    return spec_from_mapping(raw)


def render_config(raw):
    """INI text for a flat key mapping (inverse of :func:`parse_config`)."""
    sections = {}
    for key, value in raw.items():
        sec, _, name = key.partition(".")
        sections.setdefault(sec, []).append((name, value))
    lines = []
    for sec, items in sections.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in items)
        lines.append("")
    return "\n".join(lines)


def apply_overrides(spec, seed=None, threads=None, out=None):
    if seed is not None:
        spec.seed = spec.values["experiment.seed"] = int(seed)
        spec.overrides["seed"] = int(seed)
    if threads is not None:
        spec.threads = spec.values["experiment.threads"] = int(threads)
        spec.overrides["threads"] = int(threads)
    if out is not None:
        spec.output_dir = spec.values["experiment.output_dir"] = str(out)
        spec.overrides["output_dir"] = str(out)
    return spec


@dataclass
class Report:
    kind: str
    columns: list
    rows: list
    summary: dict
    passed: bool = None
    extra_files: dict = field(default_factory=dict)


# -- builders ---------------------------------------------------------------


def _build_drift(spec, n_particles=1):
    v = spec.values
    params = {
        "alpha1": v["drift.alpha1"],
        "alpha2": v["drift.alpha2"],
        "truncation_delta": v["drift.truncation_delta"],
        "nu_atoms": v["drift.nu_atoms"],
        "F": v["drift.F"],
        "phi": v["drift.phi"],
    }
    drift = ex.build_drift(v["drift.name"], v["drift.dim"], params, n_particles=n_particles)
    if v["drift.static"]:
        drift = ex.freeze_to_average(drift)
    return drift


def _build_diffusion(spec, d):
    return DiffusionSpec.identity(d, spec["diffusion.scale"])


def _initial(spec):
    v = spec.values
    return InitialSampler(
        kind=v["sim.initial"], loc=v["sim.initial_loc"], scale=v["sim.initial_scale"],
        low=v["sim.initial_low"], high=v["sim.initial_high"],
    )


def _sim_config(spec, eps, record_times=(), record_every=None):
    v = spec.values
    dt = eps / v["sim.dt_ratio"] if v["sim.dt_ratio"] else v["sim.dt"]
    T = v["sim.T"]
    K = int(math.floor(T / dt + 1e-9))
    if record_every is None:
        record_every = v["sim.record_every"] or K
    return SimConfig(
        T=T, dt=dt, epsilon=eps, n_particles=v["sim.n_particles"], n_replicas=v["sim.n_replicas"],
        seed=spec.seed, initial=_initial(spec), proj_mesh=v["sim.proj_mesh"],
        allow_underresolved=v["sim.allow_underresolved"], rescaled=v["sim.rescaled"],
        record_every=max(1, record_every), record_times=tuple(record_times), threads=spec.threads,
    )


def _mu_dependent(spec, drift):
    flag = spec["study.mu_dependent"]
    return drift.measure_dependent if flag == "auto" else flag == "true"


def _rate_params(spec, d):
    return RateParams(spec["study.alpha"], d, spec["study.p0"], spec["study.ell"], spec["study.delta"])


def _fit(points):
    usable = [(e, v) for e, v in points if v is not None and v > 0 and math.isfinite(v)]
    if len(usable) < 3:
        return None
    return fit_rate(usable)


def _non_monotone(values):
    vals = [v for v in values if v is not None]
    return any(b > a for a, b in zip(vals, vals[1:]))


def _base_summary(spec, **extra):
    out = {
        "version": version_string(),
        "kind": spec.kind,
        "seed": spec.seed,
        "config_echo": dict(spec.raw),
        "cli_overrides": dict(spec.overrides),
    }
    out.update(extra)
    return out


# -- studies ----------------------------------------------------------------


def run_strong_study(spec):
    """Epsilon sweep of the strong error with a log-log slope gate."""
    drift = _build_drift(spec, spec["sim.n_particles"])
    diff = _build_diffusion(spec, drift.dim)
    ell = spec["study.ell"]
    rows = []
    for eps in spec.eps_grid:
        cfg = _sim_config(spec, eps)
        row = {
            "eps": eps, "estimate": None, "std_error": None, "n_replicas": cfg.n_replicas,
            "n_particles": cfg.n_particles, "dt": cfg.dt,
            "delta_trunc": drift.meta.get("truncation_delta"), "status": "ok",
        }
        try:
            ens = simulate_coupled(cfg, drift, diff)
            es = strong_error(ens, ell)
            row["estimate"], row["std_error"] = es.estimate, es.std_error
        except (DivergenceError, SingularEvaluationError) as exc:
            row["status"] = f"failed: {exc}"
        rows.append(row)

    mu_dep = _mu_dependent(spec, drift)
    rp = _rate_params(spec, drift.dim)
    predicted = float(strong_rate_exponent(rp, mu_dependent=mu_dep))
    band = spec["study.band"]
    estimates = [r["estimate"] for r in rows]
    ok_rows = [r for r in rows if r["status"] == "ok"]
    degenerate = bool(ok_rows) and all(r["estimate"] == 0 for r in ok_rows)
    fit = _fit([(r["eps"], r["estimate"]) for r in rows])
    gates = {}
    if degenerate:
        gates["slope"] = True
    else:
        gates["slope"] = fit is not None and fit[0] >= predicted - band
    gates["all_eps_ran"] = all(r["status"] == "ok" for r in rows)
    summary = _base_summary(
        spec,
        drift=drift.name,
        delta_trunc=drift.meta.get("truncation_delta"),
        n_particles=spec["sim.n_particles"],
        n_replicas=spec["sim.n_replicas"],
        dt={f"{r['eps']:.17g}": r["dt"] for r in rows},
        ell=ell,
        mu_dependent=mu_dep,
        fitted_slope=None if fit is None else fit[0],
        fitted_intercept=None if fit is None else fit[1],
        r_squared=None if fit is None else fit[2],
        predicted_exponent=predicted,
        predicted_rms_order=predicted / (2 * ell),
        band=band,
        degenerate=degenerate,
        non_monotone_errors=_non_monotone(estimates),
        gates=gates,
    )
    cols = ["eps", "estimate", "std_error", "n_replicas", "n_particles", "dt", "delta_trunc", "status"]
    return Report("strong_study", cols, rows, summary, passed=all(gates.values()))


def _jackknife_tv(ens, k, bin_width):
    R, N, _, d = ens.paths_eps.shape
    a = ens.paths_eps[:, :, k, :]
    b = ens.paths_avg[:, :, k, :]
    if R < 2:
        return 0.0
    vals = []
    for r in range(R):
        keep = np.arange(R) != r
        vals.append(tv_histogram(a[keep].reshape(-1, d), b[keep].reshape(-1, d), bin_width))
    vals = np.array(vals)
    return float(math.sqrt((R - 1) / R * np.sum((vals - vals.mean()) ** 2)))


def _record_index(ens, t):
    k = int(np.argmin(np.abs(ens.grid - t)))
    if not math.isclose(ens.grid[k], t, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"checkpoint {t} not on the time grid")
    return k


def _resolve_width(width, a, b):
    if width == "auto":
        from .metrics import freedman_diaconis

        return freedman_diaconis(np.concatenate([a, b]))
    return np.broadcast_to(np.asarray(width, dtype=np.float64), (a.shape[1],))


def run_weak_study(spec):
    """Epsilon sweep of the histogram total variation at the checkpoints."""
    drift = _build_drift(spec, spec["sim.n_particles"])
    if drift.dim > 3 and spec["study.test_family"] == "none":
        raise ConfigurationError("histogram TV needs d <= 3; set study.test_family")
    diff = _build_diffusion(spec, drift.dim)
    family = tanh_family() if spec["study.test_family"] == "tanh" else None
    rows = []
    per_eps = []
    stability = None
    for i, eps in enumerate(spec.eps_grid):
        cfg = _sim_config(spec, eps, record_times=spec.checkpoints)
        try:
            ens = simulate_coupled(cfg, drift, diff)
        except (DivergenceError, SingularEvaluationError) as exc:
            rows.append({"eps": eps, "checkpoint": None, "tv_hist": None, "tv_lb": None,
                         "bin_width": None, "tv_se": None, "status": f"failed: {exc}"})
            per_eps.append((eps, None, None))
            continue
        best = (-1.0, 0.0)
        for c in spec.checkpoints:
            k = _record_index(ens, c)
            a, b = ens.at_time(ens.grid[k])
            width = _resolve_width(spec["study.bin_width"], a, b)
            tv = tv_histogram(a, b, width)
            se = _jackknife_tv(ens, k, width)
            lb = tv_lower_bound(a, b, family) if family is not None else None
            rows.append({"eps": eps, "checkpoint": c, "tv_hist": tv, "tv_lb": lb,
                         "bin_width": float(width[0]), "tv_se": se, "status": "ok"})
            if tv > best[0]:
                best = (tv, se)
        per_eps.append((eps, best[0], best[1]))
        if spec["study.stability_check"] and i == len(spec.eps_grid) - 1:
            a, b = ens.at_time(spec.checkpoints[-1])
            w0 = _resolve_width(spec["study.bin_width"], a, b)
            vals = [tv_histogram(a, b, w0 / 2 ** j) for j in range(3)]
            k = _record_index(ens, spec.checkpoints[-1])
            band = 3 * _jackknife_tv(ens, k, w0)
            stability = {"widths": [float(w0[0] / 2 ** j) for j in range(3)], "tv": vals,
                         "band": band, "max_change": max(abs(v - vals[0]) for v in vals)}

    rp = _rate_params(spec, drift.dim)
    predicted = float(weak_rate_exponent(rp))
    band = spec["study.band"]
    tvs = [p[1] for p in per_eps]
    ok = [p for p in per_eps if p[1] is not None]
    degenerate = bool(ok) and all(p[1] == 0 for p in ok)
    fit = _fit([(p[0], p[1]) for p in per_eps])
    decreasing = all(
        b[1] < a[1] + 3 * math.hypot(a[2], b[2]) or (a[1] == 0 and b[1] == 0)
        for a, b in zip(ok, ok[1:])
    )
    gates = {
        "slope": True if degenerate else (fit is not None and fit[0] >= predicted - band),
        "decreasing": decreasing,
        "all_eps_ran": len(ok) == len(per_eps),
    }
    if stability is not None:
        stability["passed"] = stability["max_change"] <= stability["band"]
        gates["bin_stability"] = stability["passed"]
    summary = _base_summary(
        spec,
        drift=drift.name,
        delta_trunc=drift.meta.get("truncation_delta"),
        n_particles=spec["sim.n_particles"],
        n_replicas=spec["sim.n_replicas"],
        pooled_samples=spec["sim.n_particles"] * spec["sim.n_replicas"],
        checkpoints=spec.checkpoints,
        max_tv_per_eps=[{"eps": e, "tv": t, "se": s} for e, t, s in per_eps],
        fitted_slope=None if fit is None else fit[0],
        r_squared=None if fit is None else fit[2],
        predicted_exponent=predicted,
        band=band,
        degenerate=degenerate,
        non_monotone_errors=_non_monotone(tvs),
        bin_stability=stability,
        gates=gates,
    )
    cols = ["eps", "checkpoint", "tv_hist", "tv_lb", "bin_width", "tv_se", "status"]
    return Report("weak_study", cols, rows, summary, passed=all(gates.values()))


def _kbm_quad_n(spec, drift, T):
    n = max(spec["kbm.quad_min"], int(math.ceil(spec["kbm.quad_per_unit"] * T)))
    if drift.period is not None:
        n = max(n, int(math.ceil(20.0 * T / drift.period)) + 1)
    return n


def run_kbm_check(spec):
    """Randomized check of ``deficiency <= omega(T) H(x, mu)`` (and the sine-average bound)."""
    v = spec.values
    rng = np.random.default_rng(spec.seed)
    d = v["drift.dim"]
    random_F = v["drift.name"] == "oscillatory_interaction" and v["drift.F"] == "random"
    tol, atol = v["kbm.tol"], v["kbm.atol"]
    T_grid = v["kbm.T_grid"]
    rows = []
    violations = []
    max_ratio = 0.0
    drift = None if random_F else _build_drift(spec, v["kbm.mu_particles"])
    for i in range(v["kbm.n_samples"]):
        params = None
        if random_F or v["drift.name"] == "oscillatory_interaction":
            if random_F:
                F, L_F = ex.random_lipschitz_F(rng, d, d)
            else:
                F, L_F = ex.F_REGISTRY[v["drift.F"]]
            atoms = ex._parse_atoms(v["drift.nu_atoms"])
            params = ex.OscillatoryInteractionParams(F, ex.PHI_REGISTRY[v["drift.phi"]], atoms, L_F, m=d)
            if random_F:
                drift = ex.oscillatory_interaction_drift(params, d)
        T = T_grid[i % len(T_grid)]
        t0 = float(rng.uniform(0.0, v["kbm.t0_max"]))
        mu = EmpiricalMeasure(rng.standard_normal((v["kbm.mu_particles"], d)))
        x = v["kbm.x_scale"] * rng.standard_normal(d)
        deficiency = kbm_deficiency(drift, x, mu, t0, T, _kbm_quad_n(spec, drift, T))
        H = drift.envelope_at(x, mu)
        bound = drift.omega(T) * H
        if deficiency <= atol:
            ratio = 0.0
        else:
            ratio = deficiency / bound if bound > 0 else math.inf
        max_ratio = max(max_ratio, ratio)
        row = {"t0": t0, "T": T, "deficiency": deficiency, "bound": bound, "ratio": ratio}
        witness = None
        if deficiency > bound * (1 + tol) + atol:
            witness = {"sample": i, "t0": t0, "T": T, "x": x.tolist(), "deficiency": deficiency, "bound": bound}
        if params is not None:
            sine_bound = ex.sine_average_bound(params, T) * H
            row["sine_average_bound"] = sine_bound
            if deficiency > sine_bound * (1 + tol) + atol and witness is None:
                witness = {"sample": i, "t0": t0, "T": T, "x": x.tolist(), "deficiency": deficiency,
                           "sine_average_bound": sine_bound}
        if witness is not None:
            violations.append(witness)
        rows.append(row)
    gates = {"no_violations": not violations}
    summary = _base_summary(
        spec,
        drift=v["drift.name"],
        random_F=random_F,
        n_samples=len(rows),
        tolerance=tol,
        absolute_tolerance=atol,
        max_ratio=max_ratio,
        violations=violations[:10],
        n_violations=len(violations),
        delta_trunc=None if drift is None else drift.meta.get("truncation_delta"),
        gates=gates,
    )
    cols = ["t0", "T", "deficiency", "bound", "ratio"]
    if any("sine_average_bound" in r for r in rows):
        cols.append("sine_average_bound")
    return Report("kbm_check", cols, rows, summary, passed=all(gates.values()))


def run_fluct_check(spec):
    """Dyadic mesh sweep of the fluctuation functional with a slope gate."""
    v = spec.values
    if v["fluct.dt_ratio"] < 10:
        raise ResolutionError(f"fluct.dt_ratio={v['fluct.dt_ratio']} < 10 under-resolves the mesh")
    if v["fluct.f"] not in FUNCTIONS:
        raise ConfigurationError(f"unknown fluct.f {v['fluct.f']!r}; choose from {sorted(FUNCTIONS)}")
    f = FUNCTIONS[v["fluct.f"]]
    d = v["drift.dim"]
    diff = _build_diffusion(spec, d)
    rows = []
    initial = _initial(spec) if "sim.initial" in spec.raw else InitialSampler("point", 0.0)
    for h in v["fluct.h_grid"]:
        cfg = SimConfig(
            T=v["sim.T"], dt=h / v["fluct.dt_ratio"], n_particles=v["sim.n_particles"],
            n_replicas=v["sim.n_replicas"], seed=spec.seed, initial=initial, record_every=1,
        )
        es = fluctuation_functional(diff, f, h, cfg)
        rows.append({"h": h, "estimate": es.estimate, "std_error": es.std_error})
    degenerate = all(r["estimate"] == 0 for r in rows)
    fit = _fit([(r["h"], r["estimate"]) for r in rows])
    lo, hi = v["fluct.slope_min"], v["fluct.slope_max"]
    gates = {"slope": True if degenerate else (fit is not None and lo <= fit[0] <= hi)}
    ordered = sorted(rows, key=lambda r: r["h"])
    monotone = all(
        a["estimate"] <= b["estimate"] + 3 * math.hypot(a["std_error"], b["std_error"])
        for a, b in zip(ordered, ordered[1:])
    )
    summary = _base_summary(
        spec,
        f=v["fluct.f"],
        T=v["sim.T"],
        n_paths=v["sim.n_replicas"] * v["sim.n_particles"],
        dt_ratio=v["fluct.dt_ratio"],
        fitted_slope=None if fit is None else fit[0],
        r_squared=None if fit is None else fit[2],
        slope_band=[lo, hi],
        degenerate=degenerate,
        shrinks_with_h=monotone,
        gates=gates,
    )
    return Report("fluct_check", ["h", "estimate", "std_error"], rows, summary, passed=all(gates.values()))


def run_rates_table(spec):
    v = spec.values
    rp = RateParams(v["rates.alpha"], v["rates.d"], v["rates.p0"], v["rates.ell"], v["rates.delta"])
    rows = rates_table(rp, v["rates.eps_list"], v["rates.mu_dependent"], v["rates.alpha2"])
    cols = list(rows[0].keys()) if rows else []
    return Report("rates_table", cols, rows, _base_summary(spec), passed=None)


def run_simulate(spec):
    drift = _build_drift(spec, spec["sim.n_particles"])
    diff = _build_diffusion(spec, drift.dim)
    cfg = _sim_config(spec, spec["sim.epsilon"], record_every=spec["sim.record_every"] or 1)
    ens = simulate_coupled(cfg, drift, diff)
    es = strong_error(ens, spec["study.ell"])
    rows = [
        {"replica": r, "mean_sup_gap": float(ens.sup_gap[r].mean()), "max_sup_gap": float(ens.sup_gap[r].max())}
        for r in range(ens.n_replicas)
    ]
    summary = _base_summary(spec, strong_error=es.estimate, strong_std_error=es.std_error, **{
        k: val for k, val in ens.meta.items() if k != "seed"
    })
    report = Report("simulate", ["replica", "mean_sup_gap", "max_sup_gap"], rows, summary, passed=None)
    if spec["sim.dump_paths"]:
        report.extra_files["paths.csv"] = ens
    return report


RUNNERS = {
    "strong_study": run_strong_study,
    "weak_study": run_weak_study,
    "kbm_check": run_kbm_check,
    "fluct_check": run_fluct_check,
    "rates_table": run_rates_table,
    "simulate": run_simulate,
}


def run(spec):
    return RUNNERS[spec.kind](spec)


# -- reporting --------------------------------------------------------------


def version_string():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
            capture_output=True, text=True, timeout=5, check=True,
        )
        desc = out.stdout.strip()
        if desc:
            return f"{__version__}+g{desc}" if not desc.startswith("v") else desc
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def to_json(obj, indent=0):
    """JSON text with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return _json_str(str(x))
        return format(x, ".17g")
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent)
    return _json_str(str(obj))


def _json_str(s):
    import json

    return json.dumps(s)


def write_report(report, out_dir):
    """Write ``<kind>.csv`` and ``<kind>_summary.json``; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{report.kind}.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(report.columns) + "\n")
        for row in report.rows:
            fh.write(",".join(_csv_cell(format_value(row.get(c))) for c in report.columns) + "\n")
    summary = dict(report.summary)
    summary["passed"] = report.passed
    json_path = os.path.join(out_dir, f"{report.kind}_summary.json")
    with open(json_path, "w") as fh:
        fh.write(to_json(summary) + "\n")
    paths = [csv_path, json_path]
    for name, ens in report.extra_files.items():
        p = os.path.join(out_dir, name)
        write_paths_csv(ens, p)
        paths.append(p)
    return paths


def _csv_cell(text):
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text
