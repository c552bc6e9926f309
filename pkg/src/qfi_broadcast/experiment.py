"""Config-driven experiments: resolve names, run checks, emit structured reports."""

from __future__ import annotations

import copy
import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .broadcast import (
    BroadcastVerdict,
    UniformVerdict,
    broadcast_report,
    check_reduced_commutativity,
    check_sld_lift,
    check_uniform,
    infinite_broadcast_channel,
    is_qfi_broadcast,
    no_cloning_audit,
)
from .channels import (
    KrausChannel,
    append_state_channel,
    dephasing_channel,
    depolarizing_channel,
    hadamard_cnot_broadcaster,
    identity_channel,
    outcome_broadcast_channel,
    pushforward,
)
from .ensembles import random_channel, random_family
from .errors import ConfigError, DegeneratePoint, QfiError
from .families import BUILTIN_FAMILIES, equatorial_measurement
from .fisher import (
    POVM,
    ParametricFamily,
    computational_basis,
    optimal_measurement_at,
    qfi,
    simulate_estimation,
)
from .qmat import DEFAULT_TOL, DensityMatrix, ToleranceConfig

SEED_ENV = "QFI_BROADCAST_SEED"
CHECKS = ("qfi", "broadcast", "uniform", "no_cloning", "sld_lift", "commutativity", "estimate")
DEFAULT_EXPECT = {
    "qfi": "Match",
    "broadcast": BroadcastVerdict.BROADCAST.value,
    "uniform": UniformVerdict.UNIFORM.value,
    "no_cloning": "Holds",
    "sld_lift": "Lifts",
    "commutativity": "Commutes",
    "estimate": "WithinBand",
}


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    family: dict
    grid: dict | list | None = None
    channel: dict | None = None
    checks: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> "ExperimentConfig":
        lines = _line_index(source) if source else {}

        def fail(path, msg):
            where = f" (line {lines[path]})" if path in lines else ""
            raise ConfigError(f"{path}{where}: {msg}")

        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            fail(sorted(unknown)[0], "unknown config key")
        if "family" not in data:
            raise ConfigError("family: required")
        family = _normalize_named(data["family"], "family", fail)
        if family["name"] not in FAMILY_NAMES:
            fail("family.name", f"unknown family {family['name']!r}; choose from {sorted(FAMILY_NAMES)}")
        channel = None
        if data.get("channel") is not None:
            channel = _normalize_named(data["channel"], "channel", fail)
            if channel["name"] not in CHANNEL_NAMES:
                fail("channel.name", f"unknown channel {channel['name']!r}; choose from {sorted(CHANNEL_NAMES)}")
        checks = []
        for i, c in enumerate(data.get("checks") or []):
            c = _normalize_named(c, f"checks.{i}", fail)
            if c["name"] not in CHECKS:
                fail(f"checks.{i}.name", f"unknown check {c['name']!r}; choose from {list(CHECKS)}")
            checks.append(c)
        grid = data.get("grid")
        if isinstance(grid, dict):
            for key in ("start", "stop", "count"):
                if key not in grid:
                    fail(f"grid.{key}", "required when grid is a mapping")
            if int(grid["count"]) < 1:
                fail("grid.count", "must be >= 1")
            if float(grid["stop"]) < float(grid["start"]):
                fail("grid.stop", "must be >= grid.start")
        elif grid is not None and not isinstance(grid, list):
            fail("grid", "must be a mapping {start, stop, count} or a list of values")
        elif isinstance(grid, list) and not grid:
            fail("grid", "must contain at least one value")
        tolerances = dict(data.get("tolerances") or {})
        try:
            ToleranceConfig.from_dict(tolerances)
        except (KeyError, TypeError) as exc:
            fail("tolerances", str(exc))
        seed = data.get("seed")
        if seed is not None and not isinstance(seed, int):
            fail("seed", "must be an integer")
        output = dict(data.get("output") or {})
        if output.get("format", "json") not in ("json", "csv"):
            fail("output.format", "must be json or csv")
        return cls(family, grid, channel, checks, tolerances, seed, output)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data, source=text)


def _normalize_named(entry, path, fail) -> dict:
    if isinstance(entry, str):
        return {"name": entry}
    if isinstance(entry, dict):
        if "name" not in entry:
            fail(f"{path}.name", "required")
        return dict(entry)
    fail(path, "must be a name or a mapping with a name field")


def _line_index(text: str) -> dict[str, int]:
    """Dotted field path -> 1-based line number, for diagnostics."""
    out: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                path = f"{prefix}.{i}"
                out[path] = v.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return out


def resolve_seed(config_seed: int | None = None, cli_seed: int | None = None) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return 0


# --------------------------------------------------------------------------
# name resolution


def tabulated_family(path: str, tol: ToleranceConfig = DEFAULT_TOL) -> ParametricFamily:
    """Family stored as ``.npz`` with arrays thetas (N,), states (N,d,d), derivatives (N,d,d), dims."""
    try:
        data = np.load(path)
        thetas, states, ders = data["thetas"], data["states"], data["derivatives"]
        dims = tuple(int(x) for x in data["dims"]) if "dims" in data else (states.shape[1],)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"family.path: cannot read tabulated family {path!r}: {exc}") from exc

    def index(t):
        i = int(np.argmin(np.abs(thetas - t)))
        if abs(thetas[i] - t) > 1e-9:
            raise ConfigError(f"θ={t} is not tabulated in {path}")
        return i

    return ParametricFamily(
        state_at=lambda t: DensityMatrix(states[index(t)], dims, tol),
        analytic_derivative=lambda t: ders[index(t)],
        domain=(float(thetas.min()), float(thetas.max())),
        dims=dims,
        name=f"file:{os.path.basename(path)}",
    )


def _family_random(opts, seed, tol):
    return random_family(int(opts.get("dim", 2)), np.random.default_rng(int(opts.get("seed", seed))),
                         pure=bool(opts.get("pure", False)))


FAMILY_NAMES: dict[str, Callable] = {name: (lambda opts, seed, tol, fn=fn: fn()) for name, fn in BUILTIN_FAMILIES.items()}
FAMILY_NAMES["random"] = _family_random
FAMILY_NAMES["file"] = lambda opts, seed, tol: tabulated_family(opts["path"], tol)


def _measurement(opts, family: ParametricFamily, theta: float, tol) -> POVM:
    if opts in (None, "optimal"):
        return optimal_measurement_at(family, theta, tol)
    if opts == "computational":
        return computational_basis(family.dim)
    if isinstance(opts, dict) and "equatorial" in opts:
        return equatorial_measurement(float(opts["equatorial"]))
    raise ConfigError(f"unknown measurement {opts!r}")


def _state_from_opts(opts, d: int) -> DensityMatrix:
    if opts in (None, "maximally_mixed"):
        return DensityMatrix(np.eye(d) / d)
    if isinstance(opts, dict) and "diag" in opts:
        return DensityMatrix(np.diag(np.asarray(opts["diag"], dtype=float)).astype(complex))
    raise ConfigError(f"unknown state {opts!r}")


def _channel_outcome_broadcast(opts, family, grid, seed, tol):
    theta0 = float(opts.get("theta0", grid[0]))
    m = _measurement(opts.get("measurement"), family, theta0, tol)
    return outcome_broadcast_channel(m, int(opts.get("n_parties", 2)), opts.get("pointer_dim"), tol)


CHANNEL_NAMES: dict[str, Callable] = {
    "identity": lambda opts, f, grid, seed, tol: identity_channel(f.dims),
    "hadamard_cnot": lambda opts, f, grid, seed, tol: hadamard_cnot_broadcaster(),
    "depolarizing": lambda opts, f, grid, seed, tol: depolarizing_channel(float(opts.get("p", 0.1)), f.dim),
    "dephasing": lambda opts, f, grid, seed, tol: dephasing_channel(f.dim),
    "append_state": lambda opts, f, grid, seed, tol: append_state_channel(
        _state_from_opts(opts.get("state"), int(opts.get("dim", 2))), f.dims, opts.get("position", "after"), tol),
    "outcome_broadcast": _channel_outcome_broadcast,
    "infinite_broadcast": lambda opts, f, grid, seed, tol: infinite_broadcast_channel(
        f, grid, int(opts.get("n_parties", 2)), tol),
    "random": lambda opts, f, grid, seed, tol: random_channel(
        f.dim, opts.get("d_out"), opts.get("env_dim"), np.random.default_rng(int(opts.get("seed", seed)))),
}


def resolve_grid(grid_spec, family: ParametricFamily) -> list[float]:
    if grid_spec is None:
        return [float(x) for x in family.default_grid(25)]
    if isinstance(grid_spec, list):
        return [float(x) for x in grid_spec]
    return [float(x) for x in np.linspace(float(grid_spec["start"]), float(grid_spec["stop"]), int(grid_spec["count"]))]


# --------------------------------------------------------------------------
# reports


def _clean(x):
    """Make values JSON-safe and round-trippable (tuples -> lists, NaN/inf -> None)."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


@dataclass
class CheckResult:
    name: str
    verdict: str
    expected: str
    passed: bool
    values: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)  # per-θ CSV rows
    error: str | None = None


@dataclass
class RunReport:
    config: dict
    checks: list
    passed: bool
    excluded_thetas: list
    seed: int
    version: str = __version__
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        data = dict(data)
        data["checks"] = [CheckResult(**c) for c in data["checks"]]
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, RunReport) and self.to_dict() == other.to_dict()

    def to_csv(self) -> str:
        return rows_to_csv([row for c in self.checks for row in c.rows])


CSV_COLUMNS = ("theta", "input_qfi", "party_index", "party_qfi", "residuals", "flags")


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def _row(check, theta, input_qfi=None, party=None, party_qfi=None, residual=None, flags=()):
    return {"theta": theta, "input_qfi": input_qfi, "party_index": party, "party_qfi": party_qfi,
            "residuals": residual, "flags": "|".join((check,) + tuple(flags))}


# --------------------------------------------------------------------------
# checks


@dataclass
class _Context:
    family: ParametricFamily
    output: ParametricFamily
    channel: KrausChannel | None
    grid: list[float]
    tol: ToleranceConfig
    seed: int
    jobs: int

    def pmap(self, fn, items):
        items = list(items)
        if self.jobs <= 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as ex:
            return list(ex.map(fn, items))


def _check_qfi(opts, ctx: _Context):
    values = ctx.pmap(lambda t: qfi(ctx.output, t, ctx.tol), ctx.grid)
    rows = [_row("qfi", t, input_qfi=v) for t, v in zip(ctx.grid, values)]
    out = {"qfi": values}
    if "expect_value" in opts:
        target, atol = float(opts["expect_value"]), float(opts.get("atol", 1e-9))
        err = max(abs(v - target) for v in values)
        out.update(max_error=err, target=target, atol=atol)
        return ("Match" if err <= atol else "Mismatch"), out, rows
    return "Match", out, rows


def _check_broadcast(opts, ctx: _Context):
    if ctx.channel is not None:
        rep = broadcast_report(ctx.channel, ctx.family, ctx.grid, ctx.tol)
    else:
        rep = is_qfi_broadcast(ctx.family, ctx.grid, ctx.tol)
    rows = []
    for i, t in enumerate(rep.theta_grid):
        flags = ("degenerate",) if t in rep.degenerate_points else ()
        for k, pq in enumerate(rep.party_qfi):
            rows.append(_row("broadcast", t, rep.input_qfi[i], k, pq[i], abs(pq[i] - rep.joint_qfi[i]), flags))
    values = {
        "joint_qfi": rep.joint_qfi, "input_qfi": rep.input_qfi, "party_qfi": rep.party_qfi,
        "max_deficit": rep.max_deficit, "max_input_deficit": rep.max_input_deficit,
        "degenerate_points": rep.degenerate_points,
    }
    return rep.verdict.value, values, rows


def _check_uniform(opts, ctx: _Context):
    candidates = [_measurement(c, ctx.family, ctx.grid[0], ctx.tol) for c in opts.get("candidates", [])]
    rep = check_uniform(ctx.family, ctx.grid, candidates, ctx.tol)
    rows = [_row("uniform", t, residual=r) for t, r in zip(rep.theta_grid, rep.per_theta_ratio)]
    values = {"per_theta_ratio": rep.per_theta_ratio, "certificate": rep.certificate,
              "candidate_source": rep.candidate_source, "degenerate_points": rep.degenerate_points}
    return rep.verdict.value, values, rows


def _check_no_cloning(opts, ctx: _Context):
    if ctx.channel is None:
        raise ConfigError("checks.no_cloning: requires a channel")
    pts = no_cloning_audit(ctx.channel, ctx.family, ctx.grid, ctx.tol, int(opts.get("split", 1)))
    delta = float(opts.get("delta", 1e-3))
    eta = float(opts.get("eta", 1e-3))
    slack = float(opts.get("slack", 1e-7))
    holds = all(p.theorem_holds(delta, eta) and p.f_a + p.f_b <= p.f_in + slack for p in pts)
    rows = []
    for p in pts:
        rows.append(_row("no_cloning", p.theta, p.f_in, 0, p.f_a, p.product_residual))
        rows.append(_row("no_cloning", p.theta, p.f_in, 1, p.f_b, p.product_residual))
    values = {"f_a": [p.f_a for p in pts], "f_b": [p.f_b for p in pts], "f_in": [p.f_in for p in pts]}
    return ("Holds" if holds else "Violated"), values, rows


def _per_party(name, fn, bound, ctx: _Context, opts):
    parties = opts.get("parties", list(range(len(ctx.output.dims))))
    rows, residuals, excluded = [], [], []

    def at(t):
        out = []
        for k in parties:
            try:
                out.append((k, fn(ctx.output, k, t, ctx.tol)))
            except DegeneratePoint:
                out.append((k, None))
        return out

    for t, res in zip(ctx.grid, ctx.pmap(at, ctx.grid)):
        for k, r in res:
            if r is None:
                excluded.append(t)
                rows.append(_row(name, t, party=k, flags=("degenerate",)))
            else:
                residuals.append(r)
                rows.append(_row(name, t, party=k, residual=r))
    worst = max(residuals) if residuals else 0.0
    return worst <= bound, {"max_residual": worst, "bound": bound, "excluded": sorted(set(excluded))}, rows


def _check_sld_lift(opts, ctx: _Context):
    bound = float(opts.get("bound", ctx.tol.sld))
    ok, values, rows = _per_party("sld_lift", check_sld_lift, bound, ctx, opts)
    return ("Lifts" if ok else "NoLift"), values, rows


def _check_commutativity(opts, ctx: _Context):
    bound = float(opts.get("bound", 1e-10))
    ok, values, rows = _per_party("commutativity", check_reduced_commutativity, bound, ctx, opts)
    return ("Commutes" if ok else "NonCommuting"), values, rows


def _check_estimate(opts, ctx: _Context):
    theta = float(opts.get("theta_true", ctx.grid[len(ctx.grid) // 2]))
    m = _measurement(opts.get("measurement", "optimal"), ctx.family, theta, ctx.tol)
    window = opts.get("window")
    interval = (theta - float(window), theta + float(window)) if window is not None else None
    rep = simulate_estimation(ctx.family, m, theta, int(opts.get("n_samples", 1000)),
                              int(opts.get("n_trials", 200)), ctx.seed, interval, ctx.tol)
    lo, hi = opts.get("band", [0.8, 1.5])
    ratio = rep.estimator_variance / rep.crb
    values = {**asdict(rep), "variance_over_crb": ratio, "band": [lo, hi]}
    rows = [_row("estimate", theta, input_qfi=rep.fisher, residual=ratio)]
    return ("WithinBand" if lo <= ratio <= hi else "OutsideBand"), values, rows


CHECK_FUNCS = {
    "qfi": _check_qfi,
    "broadcast": _check_broadcast,
    "uniform": _check_uniform,
    "no_cloning": _check_no_cloning,
    "sld_lift": _check_sld_lift,
    "commutativity": _check_commutativity,
    "estimate": _check_estimate,
}


def run(config: ExperimentConfig, seed: int | None = None, strict: bool = False, jobs: int = 1) -> RunReport:
    """Execute every requested check; failures are recorded in the report."""
    start = time.perf_counter()
    seed = resolve_seed(config.seed, seed)
    tol = ToleranceConfig.from_dict(config.tolerances) if config.tolerances else DEFAULT_TOL
    fam_spec = config.family
    family = FAMILY_NAMES[fam_spec["name"]](fam_spec, seed, tol)
    grid = resolve_grid(config.grid, family)
    channel = None
    if config.channel is not None:
        try:
            channel = CHANNEL_NAMES[config.channel["name"]](config.channel, family, grid, seed, tol)
        except (QfiError, ValueError) as exc:
            if strict or isinstance(exc, ConfigError):
                raise
            channel = exc
    results = []
    excluded: set[float] = set()
    if isinstance(channel, Exception):
        results.append(CheckResult("channel", type(channel).__name__, "constructed", False, error=str(channel)))
        channel = None
        output = family
    else:
        output = pushforward(channel, family, tol) if channel is not None else family
    ctx = _Context(family, output, channel, grid, tol, seed, jobs)
    for opts in config.checks:
        name = opts["name"]
        expected = str(opts.get("expect", DEFAULT_EXPECT[name]))
        try:
            verdict, values, rows = CHECK_FUNCS[name](opts, ctx)
            error = None
        except ConfigError:
            raise
        except QfiError as exc:
            if strict:
                raise
            verdict, values, rows, error = type(exc).__name__, {}, [], str(exc)
        for key in ("degenerate_points", "excluded"):
            excluded.update(values.get(key) or ())
        results.append(CheckResult(name, verdict, expected, verdict == expected, _clean(values), _clean(rows), error))
    return RunReport(
        config=_clean(config.to_dict()),
        checks=results,
        passed=all(r.passed for r in results),
        excluded_thetas=sorted(excluded),
        seed=seed,
        wall_time=time.perf_counter() - start,
    )


def set_path(data: dict, path: str, value: Any) -> dict:
    """Copy of ``data`` with the dotted ``path`` (list indices allowed) set to ``value``."""
    out = copy.deepcopy(data)
    keys = path.split(".")
    node = out
    for i, key in enumerate(keys[:-1]):
        nxt = keys[i + 1]
        if isinstance(node, list):
            try:
                node = node[int(key)]
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}: bad list index {key!r}") from exc
        else:
            if key not in node or node[key] is None:
                node[key] = [] if nxt.isdigit() else {}
            elif isinstance(node[key], str):
                node[key] = {"name": node[key]}
            node = node[key]
    last = keys[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: bad list index {last!r}") from exc
    else:
        node[last] = value
    return out


def sweep(config: ExperimentConfig, vary: str, values: list, seed: int | None = None,
          strict: bool = False, jobs: int = 1) -> list[RunReport]:
    """One independent :func:`run` per value of the parameter at ``vary``."""
    base = config.to_dict()
    configs = [ExperimentConfig.from_dict(set_path(base, vary, v)) for v in values]
    if jobs <= 1 or len(configs) < 2:
        return [run(c, seed, strict) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda c: run(c, seed, strict), configs))
