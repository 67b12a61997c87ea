"""Config-driven command line driver.

One plain-text configuration format (versioned, flat dotted keys, '#'
comments) feeds every subcommand. Artifacts are CSV for numeric series (full
double precision, so reruns are byte-identical) and JSON for summaries; each
run directory also receives the verbatim input config, the fully resolved
key set, and a manifest with versions and wall time.
"""

from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (ProbeSettings, Thresholds, classify_run,
                       critical_sigma, front_asymptotics)
from .critical import critical_speeds
from .eigen import principal_eigenvalue
from .errors import ParseError, PerifrontError, ValidationError
from .fbp import InitialData, simulate
from .periodic import (DEFAULT_NODES, PeriodicFn, Problem, Reaction,
                       validate_hypotheses)
from .semiwave import (boundary_flux, half_line_profile,
                       relax_dirichlet_pinned, relax_dirichlet_zero)

TASKS = ("eigen", "semiwave", "critical", "simulate", "classify", "threshold",
         "validate")
SCHEMA_VERSION = 1
ENV_OUTPUT_ROOT = "PERIFRONT_OUT"


# -- coefficient specs ---------------------------------------------------------

@dataclass(frozen=True)
class CoeffSpec:
    """Deferred periodic-function literal; resolved once the period is known."""

    kind: str              # "const" | "sin-offset" | "samples"
    params: tuple

    def resolve(self, period: float, n: int = DEFAULT_NODES) -> PeriodicFn:
        if self.kind == "const":
            return PeriodicFn.constant(self.params[0], period, n)
        if self.kind == "sin-offset":
            mean, terms = self.params
            return PeriodicFn.sin_offset(period, mean=mean, terms=terms, n=n)
        return PeriodicFn(period, np.array(self.params, dtype=float))

    def describe(self) -> str:
        if self.kind == "const":
            return f"const {self.params[0]:.17g}"
        if self.kind == "sin-offset":
            mean, terms = self.params
            body = ",".join(f"{a:.17g}:{h:.17g}:{p:.17g}" for a, h, p in terms)
            return f"sin-offset mean={mean:.17g} terms={body}"
        return "samples " + ",".join(f"{v:.17g}" for v in self.params)


def _parse_coeff(text: str) -> CoeffSpec:
    tokens = text.split()
    if not tokens:
        raise ValueError("empty coefficient spec")
    kind = tokens[0]
    if kind == "const":
        if len(tokens) != 2:
            raise ValueError("usage: const VALUE")
        return CoeffSpec("const", (float(tokens[1]),))
    if kind == "sin-offset":
        mean = 0.0
        amp = None
        harmonic = 1.0
        phase = 0.0
        terms = []
        for tok in tokens[1:]:
            if "=" not in tok:
                raise ValueError(f"expected key=value, got '{tok}'")
            key, _, val = tok.partition("=")
            if key == "mean":
                mean = float(val)
            elif key == "amp":
                amp = float(val)
            elif key == "harmonic":
                harmonic = float(val)
            elif key == "phase":
                phase = float(val)
            elif key == "terms":
                for triple in val.split(","):
                    parts = triple.split(":")
                    if len(parts) != 3:
                        raise ValueError("terms entries must be amp:harmonic:phase")
                    terms.append(tuple(float(p) for p in parts))
            else:
                raise ValueError(f"unknown sin-offset key '{key}'")
        if amp is not None:
            terms.append((amp, harmonic, phase))
        return CoeffSpec("sin-offset", (mean, tuple(terms)))
    if kind == "samples":
        if len(tokens) != 2:
            raise ValueError("usage: samples v1,v2,...")
        vals = tuple(float(v) for v in tokens[1].split(","))
        if len(vals) < 16:
            raise ValueError("sample arrays need at least 16 values")
        return CoeffSpec("samples", vals)
    raise ValueError(f"unknown coefficient kind '{kind}' "
                     "(expected const, sin-offset, or samples)")


# -- key schema -----------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: '{text}'")


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _positive(x):
    return (x > 0, "must be > 0")


def _nonneg(x):
    return (x >= 0, "must be >= 0")


def _at_least(n):
    return lambda x: (x >= n, f"must be >= {n}")


def _one_of(*opts):
    return lambda x: (x in opts, f"must be one of {opts}")


def _all_positive(xs):
    return (all(v > 0 for v in xs), "every entry must be > 0")


def _any(x):
    return (True, "")


# key -> (parser, validator, default); None default means "required if used"
KEY_SCHEMA = {
    "schema": (int, _one_of(SCHEMA_VERSION), SCHEMA_VERSION),
    "task": (str, _one_of(*TASKS), None),
    "problem.T": (float, _positive, 1.0),
    "problem.force": (_parse_bool, _any, False),
    "problem.beta": (_parse_coeff, _any, CoeffSpec("const", (0.0,))),
    "problem.mu": (_parse_coeff, _any, CoeffSpec("const", (1.0,))),
    "problem.reaction": (str, _one_of("logistic"), "logistic"),
    "problem.reaction.a": (_parse_coeff, _any, CoeffSpec("const", (1.0,))),
    "problem.reaction.b": (_parse_coeff, _any, CoeffSpec("const", (1.0,))),
    "grid.nodes_per_unit": (int, _at_least(64), 256),
    "grid.steps_per_period": (int, _at_least(64), 512),
    "grid.nxi": (int, _at_least(64), 1024),
    "grid.dtfrac": (int, _at_least(64), 1024),
    "grid.halfline_radius": (float, _positive, 24.0),
    "grid.eigen_nz": (int, _at_least(64), 512),
    "grid.eigen_nt": (int, _at_least(64), 512),
    "tol.period": (float, _positive, 1e-8),
    "tol.fixed_point": (float, _positive, 1e-5),
    "tol.truncation": (float, _positive, 2e-5),
    "tol.lambda": (float, _positive, 1e-5),
    "tol.critical_b": (float, _positive, 1e-3),
    "tol.sigma_rel": (float, _positive, 1e-2),
    "tol.extinction": (float, _positive, 1e-4),
    "tol.near_state": (float, _positive, 1e-2),
    "classify.window": (float, _positive, 10.0),
    "classify.escape_radius": (float, _positive, 15.0),
    "classify.g_stall": (float, _positive, 0.05),
    "classify.min_periods": (float, _positive, 5.0),
    "classify.horizon_periods": (float, _positive, 60.0),
    "classify.max_extensions": (int, _nonneg, 4),
    "task.k": (_parse_coeff, _any, CoeffSpec("const", (0.0,))),
    "task.ell": (_parse_float_list, _all_positive, None),
    "task.kind": (str, _one_of("dd0", "dd1", "halfline"), "halfline"),
    "task.radius": (float, _positive, None),
    "task.h0": (float, _positive, None),
    "task.sigma": (float, _nonneg, 1.0),
    "task.phi": (str, _one_of("cosine", "bump", "tent"), "cosine"),
    "task.horizon_periods": (float, _positive, 60.0),
    "task.snapshot_every": (float, _positive, 1.0),
    "task.bracket_lo": (float, _positive, 0.5),
    "task.bracket_hi": (float, _positive, 8.0),
    "task.budget": (int, _positive, 24),
    "output.dir": (str, _any, "out"),
    "output.t_stride": (int, _at_least(1), 16),
    "output.z_stride": (int, _at_least(1), 4),
}

# keys whose values may be swept over a comma list (scalars only)
SWEEPABLE_TYPES = (int, float)

REQUIRED_BY_TASK = {
    "eigen": ("task.ell",),
    "semiwave": (),
    "critical": (),
    "simulate": ("task.h0",),
    "classify": ("task.h0",),
    "threshold": ("task.h0",),
    "validate": (),
}


@dataclass
class RunConfig:
    """Fully validated configuration with defaults filled."""

    values: dict
    sweep: dict = field(default_factory=dict)   # key -> tuple of values
    raw_text: str = ""

    def get(self, key: str):
        return self.values[key]

    def echo(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if val is None:
                continue
            if isinstance(val, CoeffSpec):
                lines.append(f"{key} = {val.describe()}")
            elif isinstance(val, tuple):
                lines.append(f"{key} = " + ",".join(f"{v:.17g}" for v in val))
            elif isinstance(val, float):
                lines.append(f"{key} = {val:.17g}")
            else:
                lines.append(f"{key} = {val}")
        for key in sorted(self.sweep):
            vals = ",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                            for v in self.sweep[key])
            lines.append(f"sweep.{key} = {vals}")
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse and validate the documented key-value format.

    Unknown keys are rejected with a closest-match suggestion; malformed
    values raise ParseError with the line number, out-of-range values raise
    ValidationError naming the constraint.
    """
    entries: dict[str, tuple[str, int]] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"line {ln}: expected 'key = value', got '{stripped}'")
        key, _, val = stripped.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ParseError(f"line {ln}: empty key")
        base = key[len("sweep."):] if key.startswith("sweep.") else key
        if base not in KEY_SCHEMA:
            hint = difflib.get_close_matches(base, KEY_SCHEMA.keys(), n=1)
            suffix = f"; did you mean '{hint[0]}'?" if hint else ""
            raise ParseError(f"line {ln}: unknown key '{key}'{suffix}")
        if key in entries:
            raise ParseError(f"line {ln}: duplicate key '{key}'")
        entries[key] = (val, ln)

    values = {}
    sweep = {}
    for key, (parser, validator, default) in KEY_SCHEMA.items():
        if key in entries:
            text_val, ln = entries[key]
            try:
                val = parser(text_val)
            except ValueError as exc:
                raise ParseError(f"line {ln}: bad value for '{key}': {exc}") from exc
            ok, constraint = validator(val)
            if not ok:
                raise ValidationError(f"'{key}' {constraint} (got {text_val})")
            values[key] = val
        else:
            values[key] = default

    for key, (text_val, ln) in entries.items():
        if not key.startswith("sweep."):
            continue
        base = key[len("sweep."):]
        parser, validator, _ = KEY_SCHEMA[base]
        if parser not in SWEEPABLE_TYPES:
            raise ValidationError(f"'{base}' cannot be swept (scalars only)")
        try:
            vals = tuple(parser(v.strip()) for v in text_val.split(","))
        except ValueError as exc:
            raise ParseError(f"line {ln}: bad sweep list for '{key}': {exc}") from exc
        if not vals:
            raise ParseError(f"line {ln}: empty sweep list for '{key}'")
        for v in vals:
            ok, constraint = validator(v)
            if not ok:
                raise ValidationError(f"'{base}' {constraint} (got {v})")
        sweep[base] = vals

    return RunConfig(values=values, sweep=sweep, raw_text=text)


# -- problem assembly ------------------------------------------------------------

def build_problem(cfg: RunConfig) -> Problem:
    T = cfg.get("problem.T")
    beta = cfg.get("problem.beta").resolve(T)
    mu = cfg.get("problem.mu").resolve(T)
    a = cfg.get("problem.reaction.a").resolve(T)
    b = cfg.get("problem.reaction.b").resolve(T)
    reaction = Reaction.logistic(a, b, T)
    return Problem(beta=beta, mu=mu, reaction=reaction)


PHI_PRESETS = {
    "cosine": lambda h0: (lambda x: np.cos(np.pi * x / (2.0 * h0))),
    "tent": lambda h0: (lambda x: 1.0 - np.abs(x) / h0),
    "bump": lambda h0: (lambda x: np.where(
        np.abs(x) < h0,
        np.exp(1.0 - 1.0 / np.maximum(1.0 - (x / h0) ** 2, 1e-300)),
        0.0)),
}


def build_initial_data(cfg: RunConfig, sigma: float | None = None) -> InitialData:
    h0 = cfg.get("task.h0")
    phi = PHI_PRESETS[cfg.get("task.phi")](h0)
    return InitialData(h0=h0, phi=phi,
                       sigma=cfg.get("task.sigma") if sigma is None else sigma)


def _thresholds(cfg: RunConfig) -> Thresholds:
    return Thresholds(extinction=cfg.get("tol.extinction"),
                      near_state=cfg.get("tol.near_state"),
                      window=cfg.get("classify.window"),
                      escape_radius=cfg.get("classify.escape_radius"),
                      g_stall=cfg.get("classify.g_stall"),
                      min_periods=cfg.get("classify.min_periods"))


def _probe_settings(cfg: RunConfig) -> ProbeSettings:
    return ProbeSettings(horizon_periods=cfg.get("classify.horizon_periods"),
                         max_extensions=cfg.get("classify.max_extensions"),
                         nxi=cfg.get("grid.nxi"), dtfrac=cfg.get("grid.dtfrac"),
                         snapshot_every=cfg.get("task.snapshot_every"))


def _solver_kwargs(cfg: RunConfig) -> dict:
    return dict(nodes_per_unit=cfg.get("grid.nodes_per_unit"),
                steps_per_period=cfg.get("grid.steps_per_period"),
                period_tol=cfg.get("tol.period"))


# -- artifact writers -------------------------------------------------------------

def _write_csv(path: Path, header: str, columns) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")


def _coefficients_csv(out: Path, problem: Problem) -> None:
    """Emit the resolved periodic coefficients as (t, value) columns."""
    t = problem.beta.grid
    _write_csv(out / "coefficients.csv", "t,beta,mu,a",
               (t, problem.beta(t), problem.mu(t), problem.reaction.a(t)))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _trajectory_artifacts(out: Path, traj, cfg: RunConfig) -> None:
    s = traj.series()
    _write_csv(out / "trajectory.csv", "t,g,h,gdot,hdot,supnorm",
               (s["times"], s["g"], s["h"], s["gdot"], s["hdot"], s["sup"]))
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    zstride = cfg.get("output.z_stride")
    for i, (t, g, h, w) in enumerate(traj.snapshots):
        xi = np.linspace(0.0, 1.0, w.size)[::zstride]
        ws = w[::zstride]
        x = g + xi * (h - g)
        _write_csv(snapdir / f"snap_{i:04d}.csv", "t,xi,x,w",
                   (np.full_like(xi, t), xi, x, ws))


def _profile_artifacts(out: Path, prof, mu, cfg: RunConfig) -> None:
    tstride = cfg.get("output.t_stride")
    zstride = cfg.get("output.z_stride")
    times = prof.times[::tstride]
    zs = prof.z[::zstride]
    field = prof.field[::tstride, ::zstride]
    tt = np.repeat(times, zs.size)
    zz = np.tile(zs, times.size)
    _write_csv(out / "profile.csv", "t,z,value", (tt, zz, field.ravel()))
    A = boundary_flux(prof, mu)
    t = A.grid
    _write_csv(out / "flux.csv", "t,A", (t, A(t)))


# -- task runners ------------------------------------------------------------------

def _run_validate(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    _coefficients_csv(out, problem)
    rep = validate_hypotheses(problem.beta, problem.mu, problem.reaction)
    _write_json(out / "hypotheses.json",
                {"clauses": rep.clauses, "details": rep.details,
                 "h0_ok": rep.h0_ok, "all_ok": rep.all_ok})
    print(rep)
    return 0


def _run_eigen(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    k = cfg.get("task.k").resolve(cfg.get("problem.T"))
    ells = cfg.get("task.ell")
    lams = []
    for ell in ells:
        res = principal_eigenvalue(k, problem.reaction.a, ell,
                                   nz=cfg.get("grid.eigen_nz"),
                                   nt=cfg.get("grid.eigen_nt"))
        lams.append(res.lambda1)
        print(f"ell={ell:.6g}  lambda1={res.lambda1:+.9g}")
    _write_csv(out / "eigen.csv", "ell,lambda1",
               (np.array(ells), np.array(lams)))
    return 0


def _run_semiwave(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    _coefficients_csv(out, problem)
    k = cfg.get("task.k").resolve(cfg.get("problem.T"))
    kind = cfg.get("task.kind")
    kwargs = _solver_kwargs(cfg)
    if kind == "halfline":
        radius = cfg.get("task.radius") or cfg.get("grid.halfline_radius")
        prof = half_line_profile(k, problem.reaction, radius,
                                 trunc_tol=cfg.get("tol.truncation"), **kwargs)
    else:
        ells = cfg.get("task.ell")
        if ells is None:
            raise ValidationError("task.ell is required for dd0/dd1 profiles")
        solver = relax_dirichlet_zero if kind == "dd0" else relax_dirichlet_pinned
        prof = solver(k, problem.reaction, ells[0], **kwargs)
    _profile_artifacts(out, prof, problem.mu, cfg)
    print(f"kind={prof.kind} zero={prof.is_zero} periods={prof.periods} "
          f"flux_mean={boundary_flux(prof, problem.mu).mean():.6g}")
    return 0


def _run_critical(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    _coefficients_csv(out, problem)
    crit = critical_speeds(problem, with_b=True,
                           radius=cfg.get("grid.halfline_radius"),
                           fp_tol=cfg.get("tol.fixed_point"),
                           trunc_tol=cfg.get("tol.truncation"),
                           b_tol=cfg.get("tol.critical_b"),
                           **_solver_kwargs(cfg))
    t = crit.r.grid
    _write_csv(out / "r.csv", "t,r", (t, crit.r(t)))
    if crit.l is not None:
        _write_csv(out / "l.csv", "t,l", (t, crit.l(t)))
    summary = {"cbar": crit.cbar, "r_mean": crit.r.mean(),
               "l_mean": crit.l.mean() if crit.l is not None else None,
               "B": crit.b_theta, "regime": crit.regime.value,
               "margin": crit.margin, "low_confidence": crit.low_confidence}
    _write_json(out / "critical.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _check_hypotheses(problem: Problem, force: bool = False) -> None:
    import warnings
    rep = validate_hypotheses(problem.beta, problem.mu, problem.reaction)
    if not rep.h0_ok:
        if not force:
            raise ValidationError(
                "hypothesis (H0) fails (set problem.force = true to run "
                "anyway):\n" + str(rep))
        warnings.warn("running despite (H0) failures:\n" + str(rep))
    if not rep.clauses.get("h1_stability", True):
        warnings.warn("stability index is not negative everywhere; "
                      "large-advection conclusions may not apply")


def _run_simulate(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    _coefficients_csv(out, problem)
    _check_hypotheses(problem, force=cfg.get("problem.force"))
    traj = simulate(problem, build_initial_data(cfg),
                    cfg.get("task.horizon_periods"),
                    nxi=cfg.get("grid.nxi"), dtfrac=cfg.get("grid.dtfrac"),
                    snapshot_every=cfg.get("task.snapshot_every"),
                    extinction_threshold=cfg.get("tol.extinction"))
    _trajectory_artifacts(out, traj, cfg)
    print(f"t_end={traj.times[-1]:.6g} g={traj.g[-1]:.6g} h={traj.h[-1]:.6g} "
          f"sup={traj.sup[-1]:.3e} exit={traj.exit_reason}")
    return 0


def _run_classify(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    _coefficients_csv(out, problem)
    _check_hypotheses(problem, force=cfg.get("problem.force"))
    crit = critical_speeds(problem, radius=cfg.get("grid.halfline_radius"),
                           fp_tol=cfg.get("tol.fixed_point"),
                           trunc_tol=cfg.get("tol.truncation"),
                           b_tol=cfg.get("tol.critical_b"),
                           **_solver_kwargs(cfg))
    outcome, traj = classify_run(problem, build_initial_data(cfg), crit,
                                 _thresholds(cfg), _probe_settings(cfg))
    _trajectory_artifacts(out, traj, cfg)
    record = {"kind": outcome.kind.value, "confidence": outcome.confidence,
              "evidence": {k: v for k, v in outcome.evidence.items()
                           if isinstance(v, (int, float, str, bool, type(None)))},
              "regime": crit.regime.value, "cbar": crit.cbar,
              "r_mean": crit.r.mean()}
    _write_json(out / "outcome.json", record)
    if outcome.kind.value in ("Spreading", "VirtualSpreading"):
        rep = front_asymptotics(traj, crit, outcome_kind=outcome.kind)
        cols = [rep.times, rep.h_minus_R, rep.speed_residual]
        header = "t,h_minus_R,speed_residual"
        if rep.g_plus_L is not None:
            cols += [rep.g_plus_L, rep.left_speed_residual]
            header += ",g_plus_L,left_speed_residual"
        _write_csv(out / "diagnostics.csv", header, cols)
        _write_csv(out / "profile_gap.csv", "t,sup_gap",
                   (rep.profile_times, rep.profile_sup))
        record["H1"] = rep.H1
        record["G1"] = rep.G1
        _write_json(out / "outcome.json", record)
    print(json.dumps({"kind": record["kind"], "confidence": record["confidence"]}))
    return 0


def _run_threshold(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    _coefficients_csv(out, problem)
    _check_hypotheses(problem, force=cfg.get("problem.force"))
    crit = critical_speeds(problem, radius=cfg.get("grid.halfline_radius"),
                           fp_tol=cfg.get("tol.fixed_point"),
                           trunc_tol=cfg.get("tol.truncation"),
                           b_tol=cfg.get("tol.critical_b"),
                           **_solver_kwargs(cfg))
    result = critical_sigma(problem, build_initial_data(cfg),
                            bracket=(cfg.get("task.bracket_lo"),
                                     cfg.get("task.bracket_hi")),
                            budget=cfg.get("task.budget"),
                            sigma_rel_tol=cfg.get("tol.sigma_rel"), crit=crit,
                            thresholds=_thresholds(cfg),
                            settings=_probe_settings(cfg))
    record = {"sigma_low": result.sigma_low, "sigma_high": result.sigma_high,
              "bracket_width": result.bracket_width,
              "confidence": result.confidence,
              "per_run_outcomes": [[s, k.value] for s, k in
                                   result.outcomes_sorted()]}
    _write_json(out / "threshold.json", record)
    print(json.dumps({"sigma_low": result.sigma_low,
                      "sigma_high": result.sigma_high}))
    return 0


TASK_RUNNERS = {
    "validate": _run_validate,
    "eigen": _run_eigen,
    "semiwave": _run_semiwave,
    "critical": _run_critical,
    "simulate": _run_simulate,
    "classify": _run_classify,
    "threshold": _run_threshold,
}


# -- run orchestration ---------------------------------------------------------------

def _resolve_out_dir(cfg: RunConfig, out_flag: str | None) -> Path:
    if out_flag:
        return Path(out_flag)
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if root:
        return Path(root) / cfg.get("output.dir")
    return Path(cfg.get("output.dir"))


def run(cfg: RunConfig, task: str, out_dir: Path) -> int:
    """Execute one task, writing artifacts plus a manifest into out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.input.txt").write_text(cfg.raw_text)
    (out_dir / "config.echo.txt").write_text(cfg.echo())
    stale = out_dir / "error.json"
    if stale.exists():
        stale.unlink()  # a rerun into the same directory must not inherit it
    t0 = time.perf_counter()
    manifest = {"schema": SCHEMA_VERSION, "task": task,
                "package_version": __version__,
                "numpy": np.__version__,
                "scipy": __import__("scipy").__version__,
                "python": sys.version.split()[0],
                "completed": False, "error": None, "wall_time_s": None}
    try:
        status = TASK_RUNNERS[task](cfg, out_dir)
        manifest["completed"] = True
        return status
    except PerifrontError as exc:
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
        _write_json(out_dir / "error.json", manifest["error"])
        raise
    finally:
        manifest["wall_time_s"] = time.perf_counter() - t0
        _write_json(out_dir / "manifest.json", manifest)


def _sweep_member(args):
    values, task, out_dir = args
    cfg = RunConfig(values=values, sweep={})
    cfg.raw_text = cfg.echo()
    try:
        run(cfg, task, Path(out_dir))
        return (out_dir, "ok", "")
    except Exception as exc:  # keep the ledger even when a member dies
        return (out_dir, "failed", f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: RunConfig, out_dir: Path, workers: int = 1) -> int:
    """Fan a Cartesian parameter grid out to independent runs.

    Each member writes into its own run_NNNN directory; a completion ledger
    records every member whether it succeeded or not, so partial sweeps keep
    their finished artifacts.
    """
    task = cfg.get("task")
    if task is None or task not in TASK_RUNNERS:
        raise ValidationError("sweep needs 'task = <name>' naming the base task")
    if not cfg.sweep:
        raise ValidationError("sweep requires at least one sweep.<key> list")
    _require_task_keys(cfg, task)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.input.txt").write_text(cfg.raw_text)
    (out_dir / "config.echo.txt").write_text(cfg.echo())

    keys = sorted(cfg.sweep)
    combos = list(product(*(cfg.sweep[k] for k in keys)))
    jobs = []
    for i, combo in enumerate(combos):
        overrides = dict(zip(keys, combo))
        values = dict(cfg.values)
        values.update(overrides)
        jobs.append((values, task, str(out_dir / f"run_{i:04d}")))

    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(job) for job in jobs]

    with open(out_dir / "sweep_ledger.csv", "w") as fh:
        fh.write("run_dir,%s,status,error\n" % ",".join(keys))
        for (values, _, run_dir), (rd, status, err) in zip(jobs, results):
            params = ",".join(f"{values[k]:.17g}" if isinstance(values[k], float)
                              else str(values[k]) for k in keys)
            fh.write(f"{Path(rd).name},{params},{status},\"{err}\"\n")
    failed = sum(1 for _, status, _ in results if status != "ok")
    print(f"sweep: {len(results) - failed}/{len(results)} members completed")
    return 1 if failed else 0


def _require_task_keys(cfg: RunConfig, task: str) -> None:
    for key in REQUIRED_BY_TASK.get(task, ()):
        if cfg.get(key) is None and key not in cfg.sweep:
            raise ValidationError(f"task '{task}' requires '{key}'")


# -- entry point -----------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perifront",
        description="Free boundary Fisher-KPP fronts in periodic environments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS + ("sweep",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel workers (sweep only)")
        p.add_argument("--seedless", action="store_true",
                       help="reject any nondeterministic option (all v1 "
                            "solvers are deterministic, so this always passes)")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    declared = cfg.get("task")
    if args.command == "sweep":
        out_dir = _resolve_out_dir(cfg, args.out)
        try:
            return run_sweep(cfg, out_dir, workers=max(args.workers, 1))
        except (ParseError, ValidationError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except PerifrontError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    if declared is not None and declared != args.command:
        print(f"config error: config declares task '{declared}' but the "
              f"'{args.command}' subcommand was invoked", file=sys.stderr)
        return 2
    try:
        _require_task_keys(cfg, args.command)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = _resolve_out_dir(cfg, args.out)
    try:
        return run(cfg, args.command, out_dir)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PerifrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
