"""Command-line runner: verification sweeps, flow trajectories, bracket
tables, duality round trips and the dimension report.

Exit status is 0 when every check passes, 1 when some check fails and 2 on
configuration errors.  Output is deterministic for a fixed configuration:
trial ``i`` draws from the Philox stream keyed by ``seed ^ i`` and results are
written in trial order whatever the number of worker processes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np
import scipy

from .chart import (
    ChartError,
    ChartPoint,
    build_matrices,
    build_vw,
    eigendata_residual,
    identity_residuals,
    vw_residuals,
)
from .duality import DualityError, dual_point, second_chart_coords
from .dynamics import (
    CONSERVATION_TOL,
    FlowError,
    conserved_names,
    drift_report,
    pg_check,
    time_grid,
    trajectory,
    trajectory_csv,
    trajectory_json,
)
from .params import (
    PARAM_NAMES,
    ParameterError,
    ParamSet,
    char_dim,
    eigendata,
    eigendata_generic,
    is_generic,
    quiver_data,
    random_params,
)
from .poisson import PoissonError, anti_poisson_check, compare_brackets, default_pairs, parse_pairs
from .sampling import RNG_ALGORITHM, params_rng, random_chart_point, trial_rng
from .variety import chart_distance, invert_chart, random_conjugator, verify_membership

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# pass thresholds per reported quantity; --tol replaces all of them
DEFAULT_TOLS = {
    "identity": 1e-8,
    "round_trip": 1e-7,
    "gauge": 1e-6,
    "involution": 1e-10,
    "eigendata": 1e-8,
    "drift": CONSERVATION_TOL,
    "pg": 1e-8,
    "bracket": 1e-6,
}

DEFAULTS = {
    "n": 2,
    "params": None,
    "seed": 0,
    "trials": 10,
    "out": "-",
    "format": None,
    "tol": None,
    "tolerances": {},
    "jobs": 1,
    "hamiltonian": "h",
    "k": 1,
    "t_grid": "0:1:11",
    "pg_check": False,
    "full": False,
    "start": None,
    "pairs": None,
    "anti_poisson": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n: int
    params: ParamSet
    seed: int
    trials: int
    out: str = "-"
    format: str = "csv"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLS))
    jobs: int = 1
    options: dict = field(default_factory=dict)

    def tol(self, key: str) -> float:
        return self.tolerances[key]

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "n": self.n,
            "params": self.params.to_dict(),
            "seed": self.seed,
            "trials": self.trials,
            "format": self.format,
            "tolerances": dict(sorted(self.tolerances.items())),
            "rng": RNG_ALGORITHM,
            "options": dict(sorted(self.options.items())),
        }


# --------------------------------------------------------------------------
# configuration


def parse_params(value, n: int) -> ParamSet:
    """Five complex values as re,im pairs, a JSON file, or a JSON record."""
    if isinstance(value, ParamSet):
        return value.with_n(n)
    if isinstance(value, dict):
        return ParamSet.from_dict({**value, "n": n})
    if isinstance(value, (list, tuple)) and len(value) == 5 and all(isinstance(v, (list, tuple)) for v in value):
        return ParamSet(*(complex(*v) for v in value), n=n)
    if isinstance(value, (list, tuple)):
        value = " ".join(str(v) for v in value)
    text = str(value).strip()
    if os.path.isfile(text):
        with open(text) as fh:
            return parse_params(json.load(fh), n)
    tokens = text.replace(";", " ").split()
    if len(tokens) != 5:
        raise ConfigError(f"--params needs five re,im pairs ({', '.join(PARAM_NAMES)}), got {len(tokens)}")
    vals = []
    for tok in tokens:
        parts = tok.split(",")
        if len(parts) != 2:
            raise ConfigError(f"malformed complex value {tok!r}; expected re,im")
        try:
            vals.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"malformed complex value {tok!r}") from exc
    return ParamSet(*vals, n=n)


def _positive_int(name: str, value) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ConfigError(f"{name} must be an integer")
    try:
        iv = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be an integer") from exc
    if iv < 1:
        raise ConfigError(f"{name} must be a positive integer")
    return iv


def make_config(command: str, given: dict, file_values: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    merged = dict(DEFAULTS)
    for src in (file_values or {}, given):
        for key, value in src.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            merged[key] = value
    n = _positive_int("n", merged["n"])
    trials = _positive_int("trials", merged["trials"])
    jobs = _positive_int("jobs", merged["jobs"])
    try:
        seed = int(merged["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("seed must be an integer") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if merged["params"] is None:
        params = random_params(params_rng(seed), n)
    else:
        params = parse_params(merged["params"], n)
    fmt = merged["format"] or ("text" if command == "quiver" else "csv")
    allowed = ("text", "json") if command == "quiver" else ("csv", "json")
    if fmt not in allowed:
        raise ConfigError(f"format {fmt!r} not available for {command}; choose from {allowed}")
    tols = dict(DEFAULT_TOLS)
    for key, value in dict(merged["tolerances"]).items():
        if key not in tols:
            raise ConfigError(f"unknown tolerance {key!r}")
        tols[key] = float(value)
    if merged["tol"] is not None:
        tol = float(merged["tol"])
        if not tol > 0:
            raise ConfigError("tolerance must be positive")
        tols = {key: tol for key in tols}
    options = {}
    if command == "flow":
        if merged["hamiltonian"] not in ("h", "H"):
            raise ConfigError("hamiltonian must be 'h' or 'H'")
        options = {
            "hamiltonian": merged["hamiltonian"],
            "k": _positive_int("k", merged["k"]),
            "t_grid": str(merged["t_grid"]),
            "pg_check": bool(merged["pg_check"]),
            "full": bool(merged["full"]),
            "start": merged["start"],
        }
        parse_grid(options["t_grid"])
    elif command == "poisson":
        pairs = default_pairs(n) if merged["pairs"] is None else parse_pairs(merged["pairs"])
        options = {"pairs": ",".join(f"{f}:{g}" for f, g in pairs), "anti_poisson": bool(merged["anti_poisson"])}
    return RunConfig(
        command=command,
        n=n,
        params=params,
        seed=seed,
        trials=trials,
        out=str(merged["out"]),
        format=fmt,
        tolerances=tols,
        jobs=jobs,
        options=options,
    )


def parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"time grid {text!r} must read a:b:steps")
    try:
        a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"time grid {text!r} must read a:b:steps") from exc
    try:
        return time_grid(a, b, steps)
    except FlowError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# output helpers


def fmt_num(x: float) -> str:
    return f"{x:.16e}"


def versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        own = "unknown"
    return {"cmvariety": own, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def csv_preamble(cfg: RunConfig) -> str:
    return f"# cmvariety {cfg.command} rng={RNG_ALGORITHM} seed={cfg.seed}\n# params={cfg.params.to_json()}\n"


def render_csv(cfg: RunConfig, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_num(v) if isinstance(v, float) else v for v in row])
    return csv_preamble(cfg) + buf.getvalue()


def render_json(cfg: RunConfig, results) -> str:
    return json.dumps({"config": cfg.to_dict(), "results": results, "versions": versions()}, sort_keys=True) + "\n"


def _run_trials(fn, cfg: RunConfig) -> list:
    args = [(cfg, i) for i in range(cfg.trials)]
    if cfg.jobs == 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(fn, args))


# --------------------------------------------------------------------------
# verify

VERIFY_COLUMNS = [
    "product",
    "hecke1",
    "hecke2",
    "hecke3",
    "a4_rank",
    "wv",
    "rank_one",
    "eigendata",
    "round_trip",
    "gauge",
]


def verify_trial(arg) -> dict:
    cfg, trial = arg
    rng = trial_rng(cfg.seed, trial)
    pt = random_chart_point(rng, cfg.params)
    row = {"trial": trial}
    try:
        vp = build_matrices(pt, check=False)
        ids = identity_residuals(vp)
        v, w = build_vw(pt, check=False)
        vw = vw_residuals(vp, v, w)
        row.update({k: ids[k] for k in ("product", "hecke1", "hecke2", "hecke3", "a4_rank")})
        row.update(wv=vw["wv"], rank_one=vw["rank_one"], eigendata=eigendata_residual(vp))
        row["round_trip"] = chart_distance(invert_chart(vp, check=False), pt)
        g = random_conjugator(rng, 2 * cfg.n)
        row["gauge"] = chart_distance(invert_chart(vp.conjugate(g), check=False), pt)
        row["error"] = ""
    except (ValueError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["passed"] = verify_passed(row, cfg)
    return row


def verify_passed(row: dict, cfg: RunConfig) -> bool:
    if row.get("error"):
        return False
    ident = cfg.tol("identity")
    return (
        all(row[k] <= ident for k in ("product", "hecke1", "hecke2", "hecke3", "wv", "rank_one"))
        and row["a4_rank"] == 1
        and row["eigendata"] <= cfg.tol("eigendata")
        and row["round_trip"] <= cfg.tol("round_trip")
        and row["gauge"] <= cfg.tol("gauge")
    )


def cmd_verify(cfg: RunConfig) -> tuple[int, str]:
    rows = _run_trials(verify_trial, cfg)
    status = EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL
    if cfg.format == "json":
        return status, render_json(cfg, rows)
    header = ["trial"] + VERIFY_COLUMNS + ["passed", "error"]
    body = [[r["trial"]] + [r.get(k, "") for k in VERIFY_COLUMNS] + [int(r["passed"]), r["error"]] for r in rows]
    return status, render_csv(cfg, header, body)


# --------------------------------------------------------------------------
# flow


def flow_start(cfg: RunConfig) -> ChartPoint:
    start = cfg.options.get("start")
    if start is None:
        return random_chart_point(trial_rng(cfg.seed, 0), cfg.params)
    try:
        with open(start) as fh:
            d = json.load(fh)
        pt = ChartPoint.from_dict({**d, "params": cfg.params.to_dict()} if "params" not in d else d)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read start point {start!r}: {exc}") from exc
    if pt.n != cfg.n:
        raise ConfigError(f"start point has rank {pt.n}, configuration has n = {cfg.n}")
    return pt


def cmd_flow(cfg: RunConfig) -> tuple[int, str]:
    """One trajectory from a random (or supplied) start point."""
    opts = cfg.options
    times = parse_grid(opts["t_grid"])
    pt = flow_start(cfg)
    p = cfg.params if opts.get("start") is None else pt.params
    if opts["pg_check"] and not all(abs(z - 1) < 1e-14 for z in (p.k0, p.u0, p.un)):
        raise ConfigError("--pg-check requires k0 = u0 = un = 1")
    vp = build_matrices(pt)
    traj = trajectory(vp, opts["hamiltonian"], opts["k"], times)
    pg = [pg_check(vp, opts["k"], float(s)) for s in times] if opts["pg_check"] else None
    drift = drift_report(traj)
    ok = all(drift[name] < cfg.tol("drift") for name in conserved_names(opts["hamiltonian"], cfg.n))
    if pg is not None:
        ok = ok and max(pg) < cfg.tol("pg")
    status = EXIT_OK if ok else EXIT_FAIL
    if cfg.format == "json":
        res = trajectory_json(traj, full=opts["full"])
        res["start"] = pt.to_dict()
        if pg is not None:
            res["pg_residual"] = pg
        res["passed"] = ok
        return status, render_json(cfg, res)
    return status, csv_preamble(cfg) + trajectory_csv(traj, pg)


# --------------------------------------------------------------------------
# poisson

POISSON_HEADER = ["trial", "kind", "f", "g", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff", "rel_diff"]


def poisson_trial(arg) -> list[list]:
    """Rows (kind, f, g, lhs, rhs, abs_diff, rel_diff).  For kind 'compare'
    lhs is the chart bracket and rhs the Fock-Rosly bracket; for 'anti' lhs
    is {H_a, h_b} in the first chart and rhs minus {h_a, H_b} in the dual
    chart at the image point."""
    cfg, trial = arg
    pt = random_chart_point(trial_rng(cfg.seed, trial), cfg.params)
    out = []
    for row in compare_brackets(pt, parse_pairs(cfg.options["pairs"])):
        out.append(["compare", row.f, row.g, row.chart, row.fr, row.abs_diff, row.rel_diff])
    if cfg.options["anti_poisson"]:
        for row in anti_poisson_check(pt):
            out.append(["anti", f"H{row.a}", f"h{row.b}", row.tau, -row.sigma, row.abs_diff, row.rel_diff])
    return out


def cmd_poisson(cfg: RunConfig) -> tuple[int, str]:
    per_trial = _run_trials(poisson_trial, cfg)
    tol = cfg.tol("bracket")
    status = EXIT_OK if all(r[6] < tol for rows in per_trial for r in rows) else EXIT_FAIL
    if cfg.format == "json":
        res = [
            {
                "trial": t,
                "kind": r[0],
                "f": r[1],
                "g": r[2],
                "lhs": [r[3].real, r[3].imag],
                "rhs": [r[4].real, r[4].imag],
                "abs_diff": r[5],
                "rel_diff": r[6],
            }
            for t, rows in enumerate(per_trial)
            for r in rows
        ]
        return status, render_json(cfg, res)
    body = [
        [t, r[0], r[1], r[2], r[3].real, r[3].imag, r[4].real, r[4].imag, r[5], r[6]]
        for t, rows in enumerate(per_trial)
        for r in rows
    ]
    return status, render_csv(cfg, POISSON_HEADER, body)


# --------------------------------------------------------------------------
# duality

DUALITY_COLUMNS = ["involution", "eigendata", "membership", "second_chart"]


def duality_trial(arg) -> dict:
    cfg, trial = arg
    pt = random_chart_point(trial_rng(cfg.seed, trial), cfg.params)
    row = {"trial": trial, "error": ""}
    try:
        vp = build_matrices(pt)
        d = dual_point(vp, check=False)
        dd = dual_point(d, check=False)
        row["involution"] = max(
            float(np.linalg.norm(a - b, 2) / max(1.0, np.linalg.norm(a, 2))) for a, b in zip(vp.mats, dd.mats)
        )
        row["eigendata"] = eigendata_residual(d)
        row["membership"] = int(verify_membership(d).passed)
        try:
            second_chart_coords(vp)
            row["second_chart"] = 1
        except DualityError:
            row["second_chart"] = 0
    except (ValueError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["passed"] = not row["error"] and (
        row["involution"] <= cfg.tol("involution")
        and row["eigendata"] <= cfg.tol("eigendata")
        and row["membership"] == 1
    )
    return row


def cmd_duality(cfg: RunConfig) -> tuple[int, str]:
    """Involution and eigendata residuals of the duality map.  A point whose
    dual leaves the second chart is reported but does not fail the run."""
    rows = _run_trials(duality_trial, cfg)
    status = EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL
    if cfg.format == "json":
        return status, render_json(cfg, rows)
    header = ["trial"] + DUALITY_COLUMNS + ["passed", "error"]
    body = [[r["trial"]] + [r.get(k, "") for k in DUALITY_COLUMNS] + [int(r["passed"]), r["error"]] for r in rows]
    return status, render_csv(cfg, header, body)


# --------------------------------------------------------------------------
# quiver


def quiver_report(p: ParamSet) -> dict:
    specs = eigendata(p)
    qd = quiver_data(p)
    dim = char_dim(0, 4, [s.multiplicities for s in specs])
    prod = qd.product_check()
    return {
        "n": p.n,
        "eigendata": [[[lam.real, lam.imag, mu] for lam, mu in s.pairs] for s in specs],
        "qvec": [[q.real, q.imag] for q in qd.qvec],
        "dimvec": list(qd.dimvec),
        "q_product": [prod.real, prod.imag],
        "dimension": dim,
        "params_generic": bool(is_generic(p)),
        "eigendata_generic": bool(eigendata_generic(specs)),
    }


def _c(z: complex) -> str:
    return f"{fmt_num(z.real)}{'+' if z.imag >= 0 else '-'}{fmt_num(abs(z.imag))}j"


def cmd_quiver(cfg: RunConfig) -> tuple[int, str]:
    rep = quiver_report(cfg.params)
    ok = rep["dimension"] == 2 * cfg.n and rep["params_generic"] and rep["eigendata_generic"]
    status = EXIT_OK if ok else EXIT_FAIL
    if cfg.format == "json":
        return status, render_json(cfg, rep)
    lines = [f"# cmvariety quiver rng={RNG_ALGORITHM} seed={cfg.seed}", f"params {cfg.params.to_json()}"]
    for label, spec in zip(("A1", "A2", "A3", "A4"), eigendata(cfg.params)):
        lines.append(f"class {label} " + " ".join(f"{_c(lam)}^{mu}" for lam, mu in spec.pairs))
    lines.append("qvec " + " ".join(_c(complex(re, im)) for re, im in rep["qvec"]))
    lines.append("dimvec " + " ".join(str(d) for d in rep["dimvec"]))
    lines.append("q_product " + _c(complex(*rep["q_product"])))
    lines.append(f"dimension {rep['dimension']}")
    lines.append(f"params_generic {int(rep['params_generic'])}")
    lines.append(f"eigendata_generic {int(rep['eigendata_generic'])}")
    lines.append("PASS" if ok else "FAIL")
    return status, "\n".join(lines) + "\n"


COMMANDS = {
    "verify": cmd_verify,
    "flow": cmd_flow,
    "poisson": cmd_poisson,
    "duality": cmd_duality,
    "quiver": cmd_quiver,
}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--n", type=int, help="rank (matrices are 2n x 2n); default 2")
    common.add_argument(
        "--params",
        nargs="+",
        help="k0 kn t u0 un as five re,im pairs, or a JSON file; default: drawn from the seed",
    )
    common.add_argument("--seed", type=int, help="64-bit unsigned seed; default 0")
    common.add_argument("--trials", type=int, help="number of random points; default 10")
    common.add_argument("--out", help="output path, '-' for stdout (default)")
    common.add_argument("--format", choices=("csv", "json", "text"), help="output format")
    common.add_argument("--tol", type=float, help="replace every pass threshold by this value")
    common.add_argument("--config", help="JSON file of flat key-value settings; flags override it")
    common.add_argument("--jobs", type=int, help="worker processes; output does not depend on it")

    parser = argparse.ArgumentParser(prog="cmvariety", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], argument_default=argparse.SUPPRESS, help="chart identities and round trips on random points")
    fl = sub.add_parser("flow", parents=[common], argument_default=argparse.SUPPRESS, help="closed-form trajectory with drift columns")
    fl.add_argument("--hamiltonian", choices=("h", "H"), help="h: tr X^k, H: tr Y^k; default h")
    fl.add_argument("--k", type=int, help="degree of the Hamiltonian; default 1")
    fl.add_argument("--t-grid", dest="t_grid", help="flow times a:b:steps; default 0:1:11")
    fl.add_argument("--pg-check", dest="pg_check", action="store_true", help="add the explicit H-flow residual")
    fl.add_argument("--full", action="store_true", help="include the matrices in JSON output")
    fl.add_argument("--start", help="JSON file with chart coordinates p, x of the start point")
    po = sub.add_parser("poisson", parents=[common], argument_default=argparse.SUPPRESS, help="chart versus Fock-Rosly brackets")
    po.add_argument("--pairs", help="comma-separated f:g list such as h1:H2,H1:H2")
    po.add_argument("--anti-poisson", dest="anti_poisson", action="store_true", help="add the duality sign-flip rows")
    sub.add_parser("duality", parents=[common], argument_default=argparse.SUPPRESS, help="duality involution and eigendata")
    sub.add_parser("quiver", parents=[common], argument_default=argparse.SUPPRESS, help="eigendata, quiver data and dimension count")
    return parser


def run(argv=None) -> tuple[int, str, RunConfig]:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    file_values = {}
    path = args.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                file_values = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = make_config(command, args, file_values)
    return COMMANDS[command](cfg) + (cfg,)


def main(argv=None) -> int:
    try:
        status, text, cfg = run(argv)
    except (ConfigError, ParameterError, ChartError, PoissonError) as exc:
        print(f"cmvariety: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowError as exc:
        print(f"cmvariety: flow failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
