"""Config validation and the experiment runners behind ``mvlab run``."""

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .core import build_uniform_partition, check_growth, check_lipschitz, Lipschitz
from .diagnostics import (
    fit_rate,
    increment_bound_check,
    moment_check,
    stability_coefficients,
    stability_driver,
    stability_initial,
    sup_sq_error,
    sup_sq_per_particle,
)
from .drivers import NoiseStream, aggregate_to_coarse, brownian_increments
from .exceptions import InvalidArgument
from .measure import EmpiricalMeasure, w2_exact_1d
from .models import get_model, list_models, mean_field_ou, osgood_drift, ou_moments
from .schemes import euler_particle_system, picard_iterate

EXPERIMENTS = (
    "euler_convergence",
    "picard",
    "stability_initial",
    "stability_coeffs",
    "stability_driver",
    "property_suite",
)

TILTS = {
    "zero": lambda t: np.zeros_like(t),
    "one": lambda t: np.ones_like(t),
    "sin": np.sin,
    "cos": np.cos,
}

_COMMON = {"experiment", "model", "params", "T", "n_steps", "particles", "seed", "output_dir", "x0"}
_EXTRA = {
    "euler_convergence": {"n_ref"},
    "picard": {"iterations", "tol"},
    "stability_initial": {"deltas"},
    "stability_coeffs": {"levels", "family", "shift"},
    "stability_driver": {"eps_list", "martingale_tilt", "bv_tilt"},
    "property_suite": {"samples"},
}


class ConfigError(InvalidArgument):
    """Invalid experiment configuration; carries the offending key and line."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line else ""
        what = f"key '{key}': " if key else ""
        super().__init__(f"{where}{what}{message}")


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _positive_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def parse_config(text):
    """Parse JSON text into a config dict, reporting syntax errors by line."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be a JSON object", line=1)
    return validate_config(cfg, text)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate_config(cfg, text=None):
    """Check keys and value types; return a normalized copy with defaults filled in."""

    def fail(key, msg):
        raise ConfigError(msg, key=key, line=_line_of(text, key))

    cfg = dict(cfg)
    for key in ("experiment", "model", "T", "n_steps", "particles", "seed"):
        if key not in cfg:
            raise ConfigError("required key is missing", key=key, line=1 if text else None)
    exp = cfg["experiment"]
    if exp not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    unknown = sorted(set(cfg) - _COMMON - _EXTRA[exp])
    if unknown:
        fail(unknown[0], f"unknown key for experiment {exp!r}")
    if not isinstance(cfg["model"], str) or cfg["model"] not in list_models():
        fail("model", f"unknown model {cfg['model']!r}; known: {', '.join(list_models())}")
    params = cfg.setdefault("params", {})
    if not isinstance(params, dict) or not all(_number(v) for v in params.values()):
        fail("params", "must be an object of finite numbers")
    try:
        get_model(cfg["model"], **params)
    except InvalidArgument as exc:
        fail("params", str(exc))
    if not _number(cfg["T"]) or cfg["T"] <= 0:
        fail("T", "must be a positive number")
    n = cfg["n_steps"]
    if exp == "euler_convergence":
        if not (isinstance(n, list) and len(n) >= 1 and all(_positive_int(v) for v in n)):
            fail("n_steps", "must be a list of positive integers")
    elif not _positive_int(n):
        fail("n_steps", "must be a positive integer")
    if not _positive_int(cfg["particles"]):
        fail("particles", "must be a positive integer")
    if not (isinstance(cfg["seed"], int) and not isinstance(cfg["seed"], bool) and 0 <= cfg["seed"] < 2**64):
        fail("seed", "must be an integer in [0, 2**64)")
    if "output_dir" in cfg and not isinstance(cfg["output_dir"], str):
        fail("output_dir", "must be a string")
    x0 = cfg.setdefault("x0", 1.0)
    if not (_number(x0) or (isinstance(x0, list) and x0 and all(_number(v) for v in x0))):
        fail("x0", "must be a number or a non-empty list of numbers")

    def number_list(key, default, positive=True):
        v = cfg.setdefault(key, default)
        if not (isinstance(v, list) and v and all(_number(x) and (x > 0 or not positive) for x in v)):
            fail(key, "must be a non-empty list of " + ("positive " if positive else "") + "numbers")

    if exp == "euler_convergence":
        nref = cfg.setdefault("n_ref", 2 * max(n))
        if not _positive_int(nref):
            fail("n_ref", "must be a positive integer")
        if any(nref % v for v in n):
            fail("n_ref", "every entry of n_steps must divide n_ref (nested grids)")
    elif exp == "picard":
        if not _positive_int(cfg.setdefault("iterations", 8)):
            fail("iterations", "must be a positive integer")
        tol = cfg.setdefault("tol", 0.0)
        if not _number(tol) or tol < 0:
            fail("tol", "must be a number >= 0")
    elif exp == "stability_initial":
        number_list("deltas", [0.5 / 2**k for k in range(6)], positive=False)
        if any(v < 0 for v in cfg["deltas"]):
            fail("deltas", "must be >= 0")
    elif exp == "stability_coeffs":
        levels = cfg.setdefault("levels", [2**k for k in range(7)])
        if not (isinstance(levels, list) and levels and all(_positive_int(v) for v in levels)):
            fail("levels", "must be a non-empty list of positive integers")
        family = cfg.setdefault("family", "drift_shift" if cfg["model"] == "mean_field_ou" else "mollify")
        if family not in ("drift_shift", "mollify"):
            fail("family", "must be 'drift_shift' or 'mollify'")
        if family == "drift_shift" and cfg["model"] != "mean_field_ou":
            fail("family", "'drift_shift' applies to mean_field_ou only")
        if family == "mollify" and cfg["model"] != "osgood_drift":
            fail("family", "'mollify' applies to osgood_drift only")
        if not _number(cfg.setdefault("shift", 1.0)):
            fail("shift", "must be a number")
    elif exp == "stability_driver":
        number_list("eps_list", [0.2 / 2**k for k in range(5)], positive=False)
        for key, default in (("martingale_tilt", "one"), ("bv_tilt", "sin")):
            if cfg.setdefault(key, default) not in TILTS:
                fail(key, f"must be one of {', '.join(TILTS)}")
    elif exp == "property_suite":
        if not _positive_int(cfg.setdefault("samples", 10000)):
            fail("samples", "must be a positive integer")
    return cfg


@dataclass
class ExperimentResult:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)


def _x0_list(cfg):
    x0 = cfg["x0"]
    return [float(v) for v in x0] if isinstance(x0, list) else [float(x0)]


def run_euler_convergence(cfg, threads=1):
    m = get_model(cfg["model"], **cfg["params"])
    T, N = float(cfg["T"]), cfg["particles"]
    fine_p = build_uniform_partition(T, cfg["n_ref"])
    fine = brownian_increments(fine_p, N, m.dim, NoiseStream(cfg["seed"]), threads=threads)
    starts = _x0_list(cfg)
    refs = [euler_particle_system(m, np.full(m.dim, x), fine_p, N, fine) for x in starts]
    rows = []
    for n in cfg["n_steps"]:
        p = build_uniform_partition(T, n)
        drv = aggregate_to_coarse(fine, p)
        worst = None
        for x, ref in zip(starts, refs):
            per = sup_sq_per_particle(euler_particle_system(m, np.full(m.dim, x), p, N, drv), ref)
            err = float(np.mean(per))
            if worst is None or err > worst[0]:
                worst = (err, float(np.std(per, ddof=1) / np.sqrt(N)) if N > 1 else 0.0)
        rows.append([n, p.mesh, worst[0], worst[1]])
    summary = {}
    if len(rows) >= 3 and all(r[2] > 0 for r in rows):
        summary["slope"] = fit_rate([r[1] for r in rows], [r[2] for r in rows])
    term = refs[0].terminal[:, 0]
    summary["terminal_mean"] = float(term.mean())
    summary["terminal_variance"] = float(term.var(ddof=1)) if N > 1 else 0.0
    summary["terminal_mean_stderr"] = float(np.sqrt(summary["terminal_variance"] / N))
    if cfg["model"] == "mean_field_ou" and m.dim == 1:
        mean, var = ou_moments(m.params, starts[0], T)
        summary["oracle_mean"] = mean
        summary["oracle_variance"] = var
    return ExperimentResult(["n_steps", "mesh", "sup_sq_error", "stderr"], rows, summary)


def run_picard(cfg, threads=1):
    m = get_model(cfg["model"], **cfg["params"])
    N = cfg["particles"]
    p = build_uniform_partition(float(cfg["T"]), cfg["n_steps"])
    drv = brownian_increments(p, N, m.dim, NoiseStream(cfg["seed"]), threads=threads)
    x0 = np.full(m.dim, _x0_list(cfg)[0])
    iterates, dist = picard_iterate(m, x0, p, N, drv, cfg["iterations"], cfg["tol"])
    rows = [[k + 1, d, moment_check(iterates[k + 1], 2)] for k, d in enumerate(dist)]
    euler = euler_particle_system(m, x0, p, N, drv)
    summary = {"final_vs_euler_sup_sq_error": sup_sq_error(iterates[-1], euler)}
    return ExperimentResult(["iterate", "successive_distance", "moment_p2"], rows, summary)


def _stability_summary(table):
    return {
        "terminal_sq_errors": table.terminal_errors,
        "w2_domination_gaps": table.w2_gaps,
        "w2_dominated": table.w2_dominated,
    }


def run_stability_initial(cfg, threads=1):
    m = get_model(cfg["model"], **cfg["params"])
    p = build_uniform_partition(float(cfg["T"]), cfg["n_steps"])
    x = np.full(m.dim, _x0_list(cfg)[0])
    table = stability_initial(m, x, cfg["deltas"], p, cfg["particles"], cfg["seed"], threads=threads)
    summary = _stability_summary(table)
    pos = [(d, e) for d, e in table.rows() if d > 0 and e > 0]
    if len(pos) >= 3:
        summary["slope"] = fit_rate(*zip(*pos))
    return ExperimentResult(["delta", "error"], [list(r) for r in table.rows()], summary)


def coefficient_family(cfg):
    """Approximating models and their limit for ``stability_coeffs``."""
    params = dict(cfg["params"])
    levels = cfg["levels"]
    if cfg["family"] == "drift_shift":
        lim = mean_field_ou(**params)
        a = lim.params.a
        seq = [mean_field_ou(**{**params, "a": a + cfg["shift"] / n}) for n in levels]
    else:
        lim = osgood_drift(**params)
        seq = [osgood_drift(**{**params, "mollify": 1.0 / n}) for n in levels]
    return seq, lim


def run_stability_coeffs(cfg, threads=1):
    seq, lim = coefficient_family(cfg)
    p = build_uniform_partition(float(cfg["T"]), cfg["n_steps"])
    x = np.full(lim.dim, _x0_list(cfg)[0])
    table = stability_coefficients(seq, lim, x, p, cfg["particles"], cfg["seed"], levels=cfg["levels"], threads=threads)
    rows = [[int(n), e] for n, e in table.rows()]
    return ExperimentResult(["n", "error"], rows, _stability_summary(table))


def run_stability_driver(cfg, threads=1):
    m = get_model(cfg["model"], **cfg["params"])
    p = build_uniform_partition(float(cfg["T"]), cfg["n_steps"])
    x = np.full(m.dim, _x0_list(cfg)[0])
    tilts = (TILTS[cfg["martingale_tilt"]], TILTS[cfg["bv_tilt"]])
    table = stability_driver(m, x, p, cfg["particles"], cfg["seed"], cfg["eps_list"], tilts, threads=threads)
    return ExperimentResult(["eps", "error"], [list(r) for r in table.rows()], _stability_summary(table))


def run_property_suite(cfg, threads=1):
    """Numeric spot checks of the model hypotheses and of the proof estimates."""
    m = get_model(cfg["model"], **cfg["params"])
    N = cfg["particles"]
    rng = np.random.default_rng(cfg["seed"])
    # samples = states x measures x times
    n_states = max(1, cfg["samples"] // 100)
    states = list(rng.normal(scale=3.0, size=(n_states, m.dim)))
    measures = [EmpiricalMeasure(rng.normal(rng.normal(scale=2.0), rng.uniform(0.1, 3.0), size=(16, m.dim))) for _ in range(10)]
    times = list(np.linspace(0.0, float(cfg["T"]), 10))
    rows = []
    g = check_growth(m, states, measures, times)
    rows.append(["growth_max_ratio", g.max_ratio, m.growth_constant, g.violations == 0])
    if isinstance(m.regularity, Lipschitz):
        lip = check_lipschitz(m, states, measures, times)
        rows.append(["lipschitz_max_ratio", lip.max_ratio, m.regularity.constant, lip.violations == 0])
    p = build_uniform_partition(float(cfg["T"]), cfg["n_steps"])
    drv = brownian_increments(p, N, m.dim, NoiseStream(cfg["seed"]), threads=threads)
    x0 = np.full(m.dim, _x0_list(cfg)[0])
    ens = euler_particle_system(m, x0, p, N, drv)
    inc = increment_bound_check(ens, 2)
    rows.append(["increment_bound_p2", inc, float("inf"), bool(np.isfinite(inc))])
    mom = moment_check(ens, 2)
    rows.append(["moment_p2", mom, float("inf"), bool(np.isfinite(mom))])
    if m.dim == 1:
        mid = ens.states.shape[1] // 2
        w = w2_exact_1d(ens.marginal(mid), ens.marginal(-1))
        rms = float(np.sqrt(np.mean((ens.states[:, mid] - ens.states[:, -1]) ** 2)))
        rows.append(["w2_le_paired_rms", w, rms, w <= rms + 1e-12])
    return ExperimentResult(["property", "value", "threshold", "passed"], rows, {})


RUNNERS = {
    "euler_convergence": run_euler_convergence,
    "picard": run_picard,
    "stability_initial": run_stability_initial,
    "stability_coeffs": run_stability_coeffs,
    "stability_driver": run_stability_driver,
    "property_suite": run_property_suite,
}


def run(cfg, threads=1):
    return RUNNERS[cfg["experiment"]](cfg, threads=threads)
