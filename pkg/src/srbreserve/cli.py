"""Command-line interface.

Every subcommand reads one JSON configuration, validates it against a schema
before computing anything, writes its tables as CSV or JSON (to ``--out`` or
standard output) and optionally renders PNG figures next to them. Exit codes:
0 success, 1 failed self-test, 2 configuration error, 3 data error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .lrb import ConditionalLaw
from .multiline import JointObservation, MultiLineConfig, correlation_components, line_reports
from .prior import PriorLaw, prior_from_config
from .quadrature import QuadratureError
from .reserve import REPORT_QUANTILES, LayerSpec, tail_ratio, tail_ratio_limit
from .sim import sample_paid_at_dates, simulate_conditional, write_ensemble_binary, write_ensemble_csv
from .stable import BridgeParams
from .timechange import TimeChangedModel, curve_from_config

__all__ = ["main", "build_parser", "CONFIG_SCHEMA", "ConfigError", "DataError"]

EXIT_OK, EXIT_SELFTEST_FAILED, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _by_kind(variants: dict) -> dict:
    """Object schema whose fields depend on its ``kind``; dispatching with if/then keeps errors specific."""
    return {
        "type": "object",
        "properties": {"kind": {"enum": list(variants)}},
        "required": ["kind"],
        "allOf": [
            {"if": {"properties": {"kind": {"const": name}}},
             "then": {"properties": {"kind": True, **fields}, "required": list(fields),
                      "additionalProperties": False}}
            for name, fields in variants.items()
        ],
    }


_PRIOR_SCHEMA = _by_kind({
    "gig": {"lambda": {"type": "number"}, "delta": _NONNEG, "gamma": _NONNEG},
    "gpd": {"sigma": _POS, "mu": _NONNEG, "shape": {"type": "number"}},
    "exponential": {"rate": _POS},
    "halfnormal": {"scale": _POS},
    "levy": {"c": _POS, "T": _POS},
    "tabulated": {"grid": {"type": "array", "items": _NONNEG, "minItems": 2},
                  "density": {"type": "array", "items": _NONNEG, "minItems": 2}},
})

_CURVE_SCHEMA = _by_kind({
    "identity": {},
    "weibull": {"a": _POS, "b": _POS},
    "tabulated": {"times": {"type": "array", "items": _NONNEG, "minItems": 1},
                  "exposure": {"type": "array", "items": _NONNEG, "minItems": 1}},
})

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "params": {"type": "object", "properties": {"c": _POS, "T": _POS}, "required": ["c", "T"],
                   "additionalProperties": False},
        "prior": _PRIOR_SCHEMA,
        "timechange": _CURVE_SCHEMA,
        "observations": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "simulate": {"type": "object", "properties": {
            "depth": {"type": "integer", "minimum": 1, "maximum": 24},
            "count": {"type": "integer", "minimum": 1},
            "binary": {"type": "boolean"},
            "workers": {"type": "integer", "minimum": 1}}, "additionalProperties": False},
        "layers": {"type": "array", "minItems": 1, "items": {"type": "object", "properties": {
            "attachment": _NONNEG,
            "limit": {"oneOf": [_POS, {"type": "null"}]},
            "dates": {"type": "array", "items": _NONNEG, "minItems": 1}},
            "required": ["attachment", "dates"], "additionalProperties": False}},
        "cvar": {"type": "object", "properties": {
            "t": _POS, "thresholds": {"type": "array", "items": _NONNEG, "minItems": 1}},
            "required": ["t", "thresholds"], "additionalProperties": False},
        "tail": {"type": "object", "properties": {
            "levels": {"type": "array", "items": _POS, "minItems": 1}},
            "required": ["levels"], "additionalProperties": False},
        "multiline": {"type": "object", "properties": {"c": _POS, "T_star": _POS, "T": _POS, "c2": _POS},
                      "required": ["c", "T_star", "T", "c2"], "additionalProperties": False},
        "mc": {"type": "object", "properties": {"count": {"type": "integer", "minimum": 2}},
               "additionalProperties": False},
    },
    "required": ["prior"],
    "additionalProperties": False,
}

_NEEDS = {
    "reserve": ("params",),
    "simulate": ("params",),
    "reinsure": ("params", "layers"),
    "cvar": ("params", "cvar"),
    "tail": ("params", "tail"),
    "multiline": ("multiline",),
}

DEFAULT_MC_COUNT = 100_000


class ConfigError(Exception):
    pass


class DataError(Exception):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclasses.dataclass
class RunContext:
    command: str
    config: dict
    base: Path
    seed: int
    out: Path | None
    fmt: str
    mc_check: bool
    plot: bool
    prior: PriorLaw
    worst_quad: float = 0.0

    def note_quad(self, err: float) -> float:
        err = float(err)
        if math.isfinite(err):
            self.worst_quad = max(self.worst_quad, err)
        return err

    @property
    def mc_count(self) -> int:
        return int(self.config.get("mc", {}).get("count", DEFAULT_MC_COUNT))



def load_config(path: Path, command: str) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    error = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(config))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {error.message}")
    missing = [key for key in _NEEDS.get(command, ()) if key not in config]
    if missing:
        raise ConfigError(f"command {command!r} needs config section(s): {', '.join(missing)}")
    if command == "multiline" and "timechange" in config:
        raise ConfigError("the multiline command does not take a timechange section")
    return config


def read_observations(path: Path, columns: tuple[str, ...], horizon: float, closed: bool = True) -> list[tuple]:
    """Rows of a headed CSV; times strictly increasing, amounts nondecreasing.

    An empty file, or one holding only the header, gives no rows.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(path, 0, f"cannot read observations: {exc}") from None
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        return []
    header = [h.strip() for h in lines[0].split(",")]
    if tuple(header) != columns:
        raise DataError(path, 1, f"header must be {','.join(columns)}")
    rows = []
    prev = None
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        fields = [f.strip() for f in raw.split(",")]
        if len(fields) != len(columns):
            raise DataError(path, lineno, f"expected {len(columns)} fields, got {len(fields)}")
        try:
            vals = tuple(float(f) for f in fields)
        except ValueError:
            raise DataError(path, lineno, f"non-numeric field in {raw.strip()!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(path, lineno, "fields must be finite")
        t, amounts = vals[0], vals[1:]
        if t < 0 or (t > horizon if closed else t >= horizon):
            raise DataError(path, lineno, f"time {t} outside [0, {horizon}{']' if closed else ')'}")
        if any(a < 0 for a in amounts):
            raise DataError(path, lineno, "paid amounts must be nonnegative")
        if t == 0 and any(a != 0 for a in amounts):
            raise DataError(path, lineno, "nothing can be paid at time 0")
        if prev is not None:
            if t <= prev[0]:
                raise DataError(path, lineno, "times must increase strictly")
            if any(a < b for a, b in zip(amounts, prev[1:])):
                raise DataError(path, lineno, "paid amounts must not decrease")
        rows.append(vals)
        prev = vals
    return rows


def _observations(ctx: RunContext, columns, horizon, closed=True) -> list[tuple]:
    path = ctx.config.get("observations")
    if path is None:
        return []
    return read_observations(ctx.base / path, columns, horizon, closed)



def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def emit_table(ctx: RunContext, name: str, rows: list[dict], meta: dict | None = None) -> None:
    """Write ``rows`` as ``<name>.csv`` / ``<name>.json`` under ``--out``, or to standard output."""
    meta = dict(meta or {})
    if ctx.fmt == "json":
        doc = {"table": name, "meta": {k: _jsonable(v) for k, v in meta.items()},
               "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows]}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        if meta:
            buf.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items()) + "\n")
        if rows:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(list(rows[0]))
            for r in rows:
                writer.writerow([_fmt(v) for v in r.values()])
        text = buf.getvalue()
    if ctx.out is None:
        if ctx.fmt == "csv":
            sys.stdout.write(f"# table={name}\n")
        sys.stdout.write(text)
    else:
        (ctx.out / f"{name}.{ctx.fmt}").write_text(text)


def _plot(ctx: RunContext, fn_name: str, rows: list[dict], stem: str) -> None:
    if not ctx.plot:
        return
    from . import plotting

    getattr(plotting, fn_name)(rows, ctx.out / f"{stem}.png")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)



def _model(ctx: RunContext) -> TimeChangedModel:
    p = ctx.config["params"]
    try:
        params = BridgeParams(float(p["c"]), float(p["T"]))
        curve = curve_from_config(ctx.config.get("timechange"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return TimeChangedModel(params, ctx.prior, curve)


def _anchor(ctx: RunContext, model: TimeChangedModel) -> tuple[float, float]:
    rows = _observations(ctx, ("t", "paid"), model.T)
    return (rows[-1][0], rows[-1][1]) if rows else (0.0, 0.0)


def cmd_reserve(ctx: RunContext) -> int:
    model = _model(ctx)
    obs = _observations(ctx, ("t", "paid"), model.T)
    if not obs or obs[0][0] > 0:
        obs = [(0.0, 0.0)] + obs
    rows = []
    for t, paid in obs:
        row = model.report(t, paid).as_dict()
        ctx.note_quad(row["quad_err"])
        rows.append(row)
    emit_table(ctx, "reserve", rows)
    _plot(ctx, "plot_reserve_development", rows, "reserve")
    return EXIT_OK


def cmd_simulate(ctx: RunContext) -> int:
    model = _model(ctx)
    opts = ctx.config.get("simulate", {})
    depth, count = int(opts.get("depth", 10)), int(opts.get("count", 1000))
    t0, x0 = _anchor(ctx, model)
    if t0 >= model.T:
        raise ConfigError("the last observation is at the horizon; nothing is left to simulate")
    law = model.law(t0, x0)
    ctx.note_quad(law.quad_error)
    ens = simulate_conditional(model.params, law, depth, count, ctx.seed, workers=int(opts.get("workers", 1)))
    calendar = np.asarray(model.calendar_times(ens.times), dtype=float)
    stats = ens.quantile_summary(REPORT_QUANTILES)
    names = ["q" + f"{round(100 * p):02d}" for p in REPORT_QUANTILES]
    rows = []
    for i, (t_cal, row) in enumerate(zip(calendar, stats)):
        r = {"t": float(t_cal), "mean": float(row[1]), **{n: float(v) for n, v in zip(names, row[2:])}}
        if ctx.mc_check:
            u = float(ens.times[i])
            expect = x0 if u == law.s else model.paid_claims_conditional_mean(t0, x0, float(t_cal))
            se = float(ens.paths[:, i].std(ddof=1)) / math.sqrt(count)
            r["analytic_mean"] = expect
            r["z_score"] = (r["mean"] - expect) / se if se > 0 else 0.0
        r["quad_err"] = law.quad_error
        rows.append(r)
    meta = {"count": count, "depth": depth, "seed": ctx.seed, "start_t": t0, "start_paid": x0}
    emit_table(ctx, "simulate_summary", rows, meta)
    if ctx.out is not None:
        cal = dataclasses.replace(ens, times=calendar)
        if opts.get("binary", False):
            write_ensemble_binary(cal, ctx.out / "paths.bin")
        else:
            write_ensemble_csv(cal, ctx.out / "paths.csv")
    _plot(ctx, "plot_quantile_fan", rows, "simulate")
    if ctx.mc_check:
        worst = max(abs(r["z_score"]) for r in rows)
        _log(f"mc-check: worst mean z-score {worst:.2f}")
    return EXIT_OK


def _layer_cumulative(values, K, L):
    return np.minimum(np.maximum(values - K, 0.0), L)


def cmd_reinsure(ctx: RunContext) -> int:
    model = _model(ctx)
    t0, x0 = _anchor(ctx, model)
    law = model.law(t0, x0)
    s = law.s
    rows, checks = [], []
    for idx, cfg in enumerate(ctx.config["layers"], start=1):
        L = math.inf if cfg.get("limit") is None else float(cfg["limit"])
        try:
            layer = LayerSpec(float(cfg["attachment"]), L, tuple(cfg["dates"]))
        except ValueError as exc:
            raise ConfigError(f"layer {idx}: {exc}") from None
        sched = model.layer_recovery_schedule(t0, x0, layer)
        K = layer.attachment
        start = min(max(x0 - K, 0.0), L)
        if model.T == s:
            direct = 0.0
        else:
            direct = law.expectation(lambda z: np.log(np.clip(np.asarray(z) - K, 1e-300, L)), lower=K).value - start
        total = sum(v for _, v in sched)
        diff = abs(total - direct)
        ok = diff <= 1e-10 * max(1.0, abs(direct))
        checks.append({"layer": idx, "sum_of_payments": total, "direct": direct, "difference": diff, "ok": ok})
        _log(f"telescoping layer {idx}: sum {float(total)!r} vs direct {float(direct)!r} (difference {diff:.2e})")
        mc = None
        if ctx.mc_check and sched:
            op_dates = [float(model.tau(d)) for d, _ in sched]
            draws = sample_paid_at_dates(model.params, law, op_dates, ctx.mc_count, ctx.seed)
            cum = _layer_cumulative(draws, K, L)
            mc = np.diff(np.column_stack([np.full(len(cum), start), cum]), axis=1)
        cumulative = start
        for j, (d, v) in enumerate(sched):
            cumulative += v
            r = {"layer": idx, "attachment": K, "limit": L, "date": float(d), "expected_payment": v,
                 "cumulative": cumulative}
            if mc is not None:
                mean, se = float(mc[:, j].mean()), float(mc[:, j].std(ddof=1)) / math.sqrt(len(mc))
                r.update(mc_payment=mean, mc_se=se, z_score=(mean - v) / se if se > 0 else 0.0)
            r["quad_err"] = ctx.note_quad(law.quad_error)
            rows.append(r)
    emit_table(ctx, "reinsure", rows, {"t": t0, "paid": x0})
    emit_table(ctx, "reinsure_telescoping", checks)
    _plot(ctx, "plot_layer_schedule", rows, "reinsure")
    if not all(c["ok"] for c in checks):
        raise QuadratureError("layer schedule does not telescope to 1e-10", total, max(c["difference"] for c in checks))
    return EXIT_OK


def cmd_cvar(ctx: RunContext) -> int:
    model = _model(ctx)
    t0, x0 = _anchor(ctx, model)
    opts = ctx.config["cvar"]
    t = float(opts["t"])
    if not t0 < t <= model.T:
        raise ConfigError(f"cvar time must lie in ({t0}, {model.T}]")
    law = model.law(t0, x0)
    ctx.note_quad(law.quad_error)
    draws = None
    if ctx.mc_check:
        draws = sample_paid_at_dates(model.params, law, [float(model.tau(t))], ctx.mc_count, ctx.seed)[:, 0]
    rows = []
    for theta in opts["thresholds"]:
        theta = float(theta)
        if not theta > x0:
            raise ConfigError(f"threshold {theta} must exceed the paid amount {x0}")
        r = {"t": t, "threshold": theta, "cvar": model.conditional_value_at_risk(t0, x0, t, theta)}
        if draws is not None:
            tail = draws[draws > theta]
            if tail.size >= 2:
                mean, se = float(tail.mean()), float(tail.std(ddof=1)) / math.sqrt(tail.size)
                r.update(mc_cvar=mean, mc_se=se, z_score=(mean - r["cvar"]) / se if se > 0 else 0.0)
            else:
                r.update(mc_cvar=None, mc_se=None, z_score=None)
        r["quad_err"] = ctx.note_quad(law.quad_error)
        rows.append(r)
    emit_table(ctx, "cvar", rows, {"t_obs": t0, "paid": x0})
    return EXIT_OK


def cmd_tail(ctx: RunContext) -> int:
    model = _model(ctx)
    t0, x0 = _anchor(ctx, model)
    law = model.law(t0, x0)
    limit = tail_ratio_limit(law)
    rows = []
    for level in ctx.config["tail"]["levels"]:
        rows.append({"level": float(level), "ratio": tail_ratio(law, float(level)), "limit": limit,
                     "quad_err": ctx.note_quad(law.quad_error)})
    emit_table(ctx, "tail", rows, {"t": t0, "paid": x0, "posterior_normalizer": law.normalizer})
    return EXIT_OK


def cmd_multiline(ctx: RunContext) -> int:
    m = ctx.config["multiline"]
    try:
        config = MultiLineConfig(float(m["c"]), float(m["T_star"]), float(m["T"]), float(m["c2"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    obs = _observations(ctx, ("t", "paid1", "paid2"), config.T, closed=False)
    if not obs or obs[0][0] > 0:
        obs = [(0.0, 0.0, 0.0)] + obs
    rows = []
    for t, x1, x2 in obs:
        for line, rep in enumerate(line_reports(config, ctx.prior, JointObservation(t, x1, x2)), start=1):
            row = {"line": line, **rep.as_dict()}
            ctx.note_quad(row["quad_err"])
            rows.append(row)
    comp = correlation_components(config, ctx.prior)
    corr = dataclasses.asdict(comp)
    if ctx.mc_check:
        from .acceptance import correlation_with_se
        from .lrb import Observation

        law0 = ConditionalLaw(ctx.prior, Observation(0.0, 0.0), config.master)
        draws = sample_paid_at_dates(config.master, law0, [config.T, config.T_star], ctx.mc_count, ctx.seed)
        x1 = draws[:, 0]
        x2 = config.k**2 * (draws[:, 1] - draws[:, 0])
        rho, se = correlation_with_se(x1, x2)
        corr.update(mc_correlation=rho, mc_se=se, z_score=(rho - comp.correlation) / se if se > 0 else 0.0)
    corr["quad_err"] = ctx.worst_quad
    emit_table(ctx, "multiline", rows)
    emit_table(ctx, "multiline_correlation", [corr], {"lam": config.lam, "k": config.k})
    _plot(ctx, "plot_line_reports", rows, "multiline")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .acceptance import run_acceptance

    numbers = None
    if args.criteria:
        try:
            numbers = sorted({int(v) for v in args.criteria.split(",")})
        except ValueError:
            _log("error: --criteria takes comma-separated integers")
            return EXIT_CONFIG
    results = run_acceptance(numbers, emit=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_SELFTEST_FAILED


COMMANDS = {
    "reserve": (cmd_reserve, "best estimate, reserve, variance and quantiles per observation"),
    "simulate": (cmd_simulate, "simulate paid-claims paths from the last observation"),
    "reinsure": (cmd_reinsure, "expected stop-loss layer payments by date"),
    "cvar": (cmd_cvar, "expected paid amount given it exceeds each threshold"),
    "tail": (cmd_tail, "ratio of prior to conditional tail probabilities"),
    "multiline": (cmd_multiline, "per-line reports and correlation for two dependent lines"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides the config)")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    common.add_argument("--mc-check", action="store_true", help="add Monte Carlo estimates and z-scores")
    common.add_argument("--plot", action="store_true", help="also render PNG figures into --out")
    parser = argparse.ArgumentParser(prog="srbreserve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--criteria", default=None, help="comma-separated criterion numbers (default: all)")
    return parser


def run(args) -> int:
    if args.command == "selftest":
        return cmd_selftest(args)
    config = load_config(args.config, args.command)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if args.plot and args.out is None:
        raise ConfigError("--plot needs --out")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    try:
        prior = prior_from_config(config["prior"])
    except ValueError as exc:
        raise ConfigError(f"prior: {exc}") from None
    ctx = RunContext(args.command, config, Path(args.config).resolve().parent, seed, args.out, args.fmt,
                     args.mc_check, args.plot, prior)
    try:
        return COMMANDS[args.command][0](ctx)
    except QuadratureError as exc:
        worst = max(ctx.worst_quad, exc.error if exc.error is not None and not math.isnan(exc.error) else 0.0)
        _log(f"numerical error: {exc}")
        _log(f"worst quadrature error estimate: {worst:.3e}")
        return EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except DataError as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA
    except ValueError as exc:
        # includes infinite-moment refusals: the configured prior cannot support the request
        _log(f"config error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
