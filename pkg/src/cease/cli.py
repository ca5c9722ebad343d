"""Command-line front end.

Configuration files are flat ``key = value`` text.  Top-level keys describe
the data and the replication plan; each ``[method]`` block adds one method::

    dataset = logistic_dense        # logistic_sparse_l1 | spambase
    m = 5
    replications = 10
    seed = 1

    [method]
    name = cease_avg_a
    variant = CEASE_AVG             # CSL | GEL | CEASE | CEASE_AVG | ADMM | AGD
    alpha = scaled:0.15             # scaled:<c> | delta2 | <number>
    T = 30
    init = zero                     # zero | average

Lines starting with ``#`` are comments.  ``[record]`` blocks (written into
run manifests) are ignored on input, so a manifest is itself a valid config.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import AdmmConfig, AgdConfig, StepSizeError, run_admm, run_agd
from .data import (DataFormatError, SPAMBASE_FIELDS, SyntheticSpec, file_sha256, generate,
                   load_spambase, partition, read_numeric_csv, test_error)
from .diagnostics import default_alpha, estimate_delta, estimate_rho
from .engine import AlgoConfig, Variant, global_minimizer, one_shot_average, run
from .model import Penalty, PenaltyKind
from .solver import ConvergenceError, SingularSystemError, SolverSettings

TRACE_COLUMNS = ["iter", "log_err_to_thetahat", "log_err_to_thetastar", "test_error",
                 "comm_vectors", "inner_residual_max", "wall_time_s", "status"]
METHOD_KINDS = {"CSL", "GEL", "CEASE", "CEASE_AVG", "ADMM", "AGD"}


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class MethodEntry:
    name: str
    variant: str
    alpha: str = "0"
    T: int = 30
    init: str = "zero"
    rho: float = 1.0
    step: float | None = None

    def __post_init__(self):
        self.variant = self.variant.strip().upper().replace("-", "_")
        if self.variant == "CEASE_SINGLE":
            self.variant = "CEASE"
        if self.variant not in METHOD_KINDS:
            raise ConfigError(f"unknown method variant {self.variant!r}")
        if self.T < 0:
            raise ConfigError("T must be nonnegative")
        if self.init not in ("zero", "average"):
            raise ConfigError(f"unknown init {self.init!r}")
        if not self.name or any(c in self.name for c in "/\\ "):
            raise ConfigError(f"method name {self.name!r} must be a plain token")
        _parse_alpha(self.alpha)


def _parse_alpha(text: str):
    text = str(text).strip()
    if text == "delta2":
        return ("delta2", None)
    if text.startswith("scaled:"):
        return ("scaled", float(text.split(":", 1)[1]))
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"cannot parse alpha rule {text!r}") from None
    if value < 0:
        raise ConfigError("alpha must be nonnegative")
    return ("fixed", value)


@dataclass
class ExperimentConfig:
    dataset: str = "logistic_dense"
    N: int | None = None
    p: int | None = None
    path: str | None = None
    test_size: int = 1000
    m: int = 5
    partition: str = "contiguous"
    penalty: str = "none"
    lam: str = "0"
    penalize_intercept: bool = True
    replications: int = 1
    seed: int = 0
    standardize: bool = True
    wall_time: bool = True
    grad_tol: float | None = None
    max_inner_iters: int | None = None
    methods: list = field(default_factory=list)

    def validate(self):
        if self.dataset not in ("logistic_dense", "logistic_sparse_l1", "spambase"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "spambase" and not self.path:
            raise ConfigError("spambase needs path = <file>")
        if not self.methods:
            raise ConfigError("at least one [method] block is required")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.penalty not in ("none", "l1", "l2"):
            raise ConfigError(f"unknown penalty {self.penalty!r}")
        names = [mt.name for mt in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("method names must be unique")
        return self

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(grad_tol=self.grad_tol, max_inner_iters=self.max_inner_iters)


_TOP_KEYS = {
    "dataset": str, "N": int, "p": int, "path": str, "test_size": int, "m": int,
    "partition": str, "penalty": str, "lambda": str, "penalize_intercept": _bool,
    "replications": int, "seed": int, "standardize": _bool, "wall_time": _bool,
    "grad_tol": float, "max_inner_iters": int,
}
_METHOD_KEYS = {"name": str, "variant": str, "alpha": str, "T": int, "init": str,
                "rho": float, "step": float}


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    block, current = "top", None
    methods = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            block = line[1:-1].strip().lower()
            if block == "method":
                current = {}
                methods.append(current)
            elif block != "record":
                raise ConfigError(f"line {lineno}: unknown block [{block}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if block == "record":
            continue
        table = _TOP_KEYS if block == "top" else _METHOD_KEYS
        if key not in table:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            parsed = table[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        if block == "top":
            setattr(cfg, "lam" if key == "lambda" else key, parsed)
        else:
            current[key] = parsed
    for i, entry in enumerate(methods):
        entry.setdefault("name", f"method{i}")
        if "variant" not in entry:
            raise ConfigError(f"[method] block {i} has no variant")
        cfg.methods.append(MethodEntry(**entry))
    return cfg.validate()


def format_config(cfg: ExperimentConfig, record: dict | None = None) -> str:
    lines = []
    for key in _TOP_KEYS:
        value = getattr(cfg, "lam" if key == "lambda" else key)
        if value is not None:
            lines.append(f"{key} = {_fmt(value)}")
    for mt in cfg.methods:
        lines.append("")
        lines.append("[method]")
        for key in _METHOD_KEYS:
            value = getattr(mt, key)
            if value is not None:
                lines.append(f"{key} = {_fmt(value)}")
    if record:
        lines.append("")
        lines.append("[record]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in record.items())
    return "\n".join(lines) + "\n"


def build_bundle(cfg: ExperimentConfig, seed: int):
    if cfg.dataset == "spambase":
        return load_spambase(cfg.path, cfg.test_size, seed, cfg.standardize)
    spec = SyntheticSpec(cfg.dataset, cfg.N, cfg.p, seed=seed)
    return generate(spec)


def build_penalty(cfg: ExperimentConfig, bundle) -> Penalty:
    if cfg.penalty == "none":
        return Penalty()
    if cfg.lam == "auto":
        lam = 0.5 * math.sqrt(math.log(bundle.p) / bundle.n_train)
    else:
        lam = float(cfg.lam)
    kind = PenaltyKind.L1 if cfg.penalty == "l1" else PenaltyKind.L2
    return Penalty(kind, lam, cfg.penalize_intercept)


def resolve_alpha(rule: str, cluster, theta0) -> float:
    kind, value = _parse_alpha(rule)
    if kind == "fixed":
        return value
    if kind == "scaled":
        return default_alpha(cluster, "scaled", c=value)
    return default_alpha(cluster, "delta2", theta=theta0)


def _trace_rows(trace, theta_hat, theta_star, test, wall_time: bool):
    rows = []
    vectors = 0
    for t, theta in enumerate(trace.iterates):
        vectors += trace.vectors_sent[t]
        e_hat = float(np.linalg.norm(theta - theta_hat))
        row = {
            "iter": t,
            "log_err_to_thetahat": math.log(e_hat) if e_hat > 0 else -math.inf,
            "log_err_to_thetastar": (math.log(float(np.linalg.norm(theta - theta_star)))
                                     if theta_star is not None else None),
            "test_error": test_error(theta, *test) if test is not None else None,
            "comm_vectors": vectors,
            "inner_residual_max": (float(np.max(trace.inner_residuals[t]))
                                   if len(trace.inner_residuals[t]) else None),
            "wall_time_s": trace.wall_times[t] if wall_time else 0.0,
            "status": "ok",
        }
        rows.append(row)
    return rows


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _run_method(entry: MethodEntry, cluster, theta0, alpha, settings):
    if entry.variant == "ADMM":
        return run_admm(cluster, AdmmConfig(rho=entry.rho, T=entry.T, init=theta0, solver=settings))
    if entry.variant == "AGD":
        return run_agd(cluster, AgdConfig(step=entry.step, T=entry.T, init=theta0, solver=settings))
    config = AlgoConfig(Variant.parse(entry.variant), alpha, entry.T, theta0, settings)
    return run(cluster, config)


def run_replication(cfg: ExperimentConfig, rep: int):
    """All methods on one replication; returns per-method rows plus record entries."""
    seed = cfg.seed + rep
    settings = cfg.solver_settings()
    bundle = build_bundle(cfg, seed)
    cluster = partition(bundle, cfg.m, cfg.partition, seed, penalty=build_penalty(cfg, bundle))
    theta_hat, resid, _ = global_minimizer(cluster, full_output=True)
    test = (bundle.X_test, bundle.y_test) if bundle.X_test is not None else None
    record = {f"theta_hat_residual.rep{rep}": resid, f"seed.rep{rep}": seed}
    if test is not None:
        record[f"central_test_error.rep{rep}"] = test_error(theta_hat, *test)
    average = None
    out, failed = {}, False
    for entry in cfg.methods:
        try:
            if entry.init == "average":
                if average is None:
                    average = one_shot_average(cluster, settings)
                theta0 = average
            else:
                theta0 = np.zeros(cluster.dim)
            alpha = resolve_alpha(entry.alpha, cluster, theta0)
            record[f"alpha.{entry.name}.rep{rep}"] = alpha
            trace = _run_method(entry, cluster, theta0, alpha, settings)
            rows = _trace_rows(trace, theta_hat, bundle.theta_star, test, cfg.wall_time)
        except (ConvergenceError, StepSizeError, SingularSystemError, FloatingPointError,
                ValueError) as exc:
            failed = True
            partial = getattr(exc, "trace", None)
            rows = (_trace_rows(partial, theta_hat, bundle.theta_star, test, cfg.wall_time)
                    if partial is not None else [])
            rows.append({"iter": len(rows), "status": "FAILED"})
            record[f"failure.{entry.name}.rep{rep}"] = str(exc).replace("\n", " ")
        out[entry.name] = rows
    return out, record, failed


def summarize(all_rows: dict, methods, replications):
    cols = ["log_err_to_thetahat", "log_err_to_thetastar", "test_error"]
    summary = []
    for entry in methods:
        per_rep = [all_rows[(entry.name, r)] for r in range(replications)]
        longest = max(len(rows) for rows in per_rep)
        for t in range(longest):
            row = {"method": entry.name, "iter": t}
            ok = [rows[t] for rows in per_rep if t < len(rows) and rows[t]["status"] == "ok"]
            row["n_reps"] = len(ok)
            for c in cols:
                vals = np.array([r[c] for r in ok if r.get(c) is not None], dtype=float)
                row[f"median_{c}"] = float(np.median(vals)) if vals.size else None
                row[f"mean_{c}"] = float(np.mean(vals)) if vals.size else None
            summary.append(row)
    columns = ["method", "iter", "n_reps"] + [f"{s}_{c}" for c in cols for s in ("median", "mean")]
    return columns, summary


def cmd_run(cfg: ExperimentConfig, out_dir, threads: int = 1) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reps = range(cfg.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: run_replication(cfg, r), reps))
    else:
        results = [run_replication(cfg, r) for r in reps]
    all_rows, record, any_failed = {}, {}, False
    for rep, (rows_by_method, rec, failed) in zip(reps, results):
        record.update(rec)
        any_failed |= failed
        for name, rows in rows_by_method.items():
            all_rows[(name, rep)] = rows
            write_csv(out / f"trace_{name}_rep{rep}.csv", TRACE_COLUMNS, rows)
    columns, summary = summarize(all_rows, cfg.methods, cfg.replications)
    write_csv(out / "summary.csv", columns, summary)
    (out / "manifest.txt").write_text(format_config(cfg, record))
    return 1 if any_failed else 0


def cmd_diagnose(cfg: ExperimentConfig, out_dir, iters: int = 200) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = build_bundle(cfg, cfg.seed)
    cluster = partition(bundle, cfg.m, cfg.partition, cfg.seed, penalty=build_penalty(cfg, bundle))
    theta_hat, resid, _ = global_minimizer(cluster, full_output=True)
    hom = estimate_delta(cluster, theta_hat, iters, seed=cfg.seed)
    curv = estimate_rho(cluster, theta_hat)
    info = {"dataset": cfg.dataset, "seed": cfg.seed, "m": cluster.m, "N": cluster.N,
            "p": cluster.p, "n": cluster.n, "theta_hat_residual": resid}
    info.update(hom.as_dict())
    info.update(curv.as_dict())
    info["alpha_scaled_0.15"] = default_alpha(cluster, "scaled", 0.15)
    info["alpha_scaled_0.05"] = default_alpha(cluster, "scaled", 0.05)
    info["alpha_delta2"] = (hom.delta ** 2 / curv.rho) if curv.rho > 0 else None
    (out / "diagnose.txt").write_text("".join(f"{k}={_fmt(v)}\n" for k, v in info.items()))
    rows = [{"machine": k, "n_k": int(cluster.sizes[k]), "hessian_gap_norm": hom.norms[k],
             "local_rho": curv.local_rhos[k]} for k in range(cluster.m)]
    write_csv(out / "per_machine_norms.csv", ["machine", "n_k", "hessian_gap_norm", "local_rho"], rows)
    return 0


def _method_label(path: Path) -> str:
    stem = path.stem
    return stem[len("trace_"):] if stem.startswith("trace_") else stem


def read_trace(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [dict(zip(header, row)) for row in reader]


def cmd_plotdata(paths, out_dir, svg: bool = True, statistic: str = "log_err_to_thetahat") -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header0, series = None, {}
    long_rows = []
    for p in map(Path, paths):
        header, rows = read_trace(p)
        if header0 is None:
            header0 = header
        elif header != header0:
            raise DataFormatError(f"{p}: columns {header} differ from {header0}")
        label = _method_label(p)
        pts = []
        for row in rows:
            for col in header:
                if col in ("iter", "status") or row.get(col, "") == "":
                    continue
                long_rows.append({"method": label, "iter": row["iter"], "statistic": col,
                                  "value": row[col]})
            if row.get(statistic, "") != "" and row.get("status", "ok") == "ok":
                pts.append((float(row["iter"]), float(row[statistic])))
        series[label] = pts
    with open(out / "long.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "iter", "statistic", "value"])
        for r in long_rows:
            writer.writerow([r["method"], r["iter"], r["statistic"], r["value"]])
    if svg:
        (out / "curves.svg").write_text(render_svg(series, statistic))
    return 0


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def render_svg(series: dict, ylabel: str, width: int = 640, height: int = 400) -> str:
    pts = [(x, y) for s in series.values() for x, y in s if math.isfinite(y)]
    margin = 50
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
             f'y2="{height - margin}" stroke="black"/>',
             f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
             f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">iteration</text>',
             f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" '
             f'text-anchor="middle">{ylabel}</text>']
    for i, (label, s) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in s if math.isfinite(y))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{coords}"><title>{label}</title></polyline>')
        parts.append(f'<text x="{width - margin + 5}" y="{margin + 15 * i}" fill="{color}" '
                     f'font-size="10">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_spambase_check(path, expected_sha256: str | None = None, out=None) -> int:
    """Validate a user-supplied Spambase file; never downloads anything."""
    out = out or sys.stdout
    try:
        data = read_numeric_csv(path, SPAMBASE_FIELDS)
    except (OSError, DataFormatError) as exc:
        print(f"error: {exc}", file=out)
        return 1
    labels = data[:, -1]
    digest = file_sha256(path)
    print(f"rows={data.shape[0]}", file=out)
    print(f"fields={data.shape[1]}", file=out)
    print(f"positives={int(np.sum(labels == 1.0))}", file=out)
    print(f"sha256={digest}", file=out)
    ok = bool(np.all((labels == 0.0) | (labels == 1.0)))
    if not ok:
        print("error: labels outside {0,1}", file=out)
    if data.shape[0] not in (4600, 4601):
        print(f"warning: expected 4600 or 4601 rows, found {data.shape[0]}", file=out)
    if expected_sha256 is not None:
        match = digest.lower() == expected_sha256.strip().lower()
        print(f"checksum_match={'true' if match else 'false'}", file=out)
        ok &= match
    return 0 if ok else 1


def _threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("CEASE_THREADS")
    return max(1, int(env)) if env else 1


def _load(args) -> ExperimentConfig:
    cfg = parse_config(Path(args.config).read_text())
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "no_standardize", False):
        cfg = replace(cfg, standardize=False)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cease", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured methods and write traces")
    p_diag = sub.add_parser("diagnose", help="homogeneity and curvature estimates")
    for p in (p_run, p_diag):
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--no-standardize", action="store_true")
    p_run.add_argument("--threads", type=int)
    p_diag.add_argument("--iters", type=int, default=200)

    p_plot = sub.add_parser("plotdata", help="merge traces into long format (+ SVG)")
    p_plot.add_argument("traces", nargs="+")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--no-svg", action="store_true")
    p_plot.add_argument("--statistic", default="log_err_to_thetahat")

    p_chk = sub.add_parser("spambase-fetch-check", help="validate a downloaded Spambase file")
    p_chk.add_argument("path")
    p_chk.add_argument("--sha256")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_load(args), args.out, _threads(args.threads))
        if args.command == "diagnose":
            return cmd_diagnose(_load(args), args.out, args.iters)
        if args.command == "plotdata":
            return cmd_plotdata(args.traces, args.out, not args.no_svg, args.statistic)
        return cmd_spambase_check(args.path, args.sha256)
    except (ConfigError, DataFormatError, OSError) as exc:
        print(f"cease: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
