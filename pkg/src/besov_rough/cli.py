"""Command-line interface: norms, variation, sewing, Young/rough solvers,
lifts, Monte Carlo experiments, and the acceptance-suite runner.

Exit codes: 0 success, 1 I/O or format error, 2 regime violation,
3 numerical failure (non-contraction).  Errors are emitted as one JSON
object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from ._rng import rng_for
from .errors import NonContractionError, RegimeError
from .grid import (
    GridFormatError,
    GridPath,
    UniformGrid,
    load_germ_csv,
    load_path_csv,
    save_path_csv,
)
from .norms import (
    INF,
    BesovParams,
    besov_level_table,
    besov_seminorm,
    oscillation_variation,
    pvariation,
)
from .sewing import SewingInput, rate_certificate, sew
from .young import (
    VectorField,
    linear_field,
    rotation_field,
    scalar_linear_field,
    sigmoid_field,
    young_ode_solve,
)
from .rough import (
    RoughPath,
    brownian_lift,
    canonical_lift,
    chen_residual,
    fbm_path,
    geometric_lift,
    lyons_extend,
)
from .controlled import (
    ControlledPath,
    controlled_norm,
    davie_residual,
    rde_solve,
    rough_integral,
)
from .stochlab import bm_besov_statistic, fbm_besov_statistic, pprod_bdg_experiment
from .acceptance import run_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise GridFormatError(message)


def _fnum(x: str) -> float:
    if x.lower() in ("inf", "infinity"):
        return INF
    return float(x)


@dataclass
class ExperimentConfig:
    """Monte Carlo experiment configuration; JSON round-trips losslessly and
    unknown keys are rejected."""

    experiment: str
    seed: int = 2024
    samples: int = 200
    level: int = 10
    p: float = 4.0
    ns: list = field(default_factory=lambda: [4, 6, 8])
    H: float = 0.4
    dim: int = 2
    gamma0: float = 0.45
    gamma1: float = 0.6
    p_tuple: list = field(default_factory=lambda: [8.0, 8.0, 4.0])
    q_tuple: list = field(default_factory=lambda: [8.0, 8.0, 4.0])
    r_tuple: list = field(default_factory=lambda: [8.0, 8.0, 4.0])
    lengths: list = field(default_factory=lambda: [128, 256, 512])
    kind: str = "gaussian"
    coupled: bool = False
    workers: int = 1
    tolerance_overrides: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise GridFormatError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise GridFormatError("config must name an 'experiment'")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _params_from_args(args) -> BesovParams:
    return BesovParams(args.alpha, args.p, args.q)


def _field_from_spec(spec: str, m: int, n: int) -> VectorField:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name == "linear":
            if n != 1 or m != 1:
                raise RegimeError(
                    "builtin:linear is the scalar dY = Y dX; use a coeffs.json"
                    " file for matrix systems"
                )
            return scalar_linear_field()
        if name == "rotation":
            if m != 2 or n != 2:
                raise RegimeError("builtin:rotation needs a 2-d state and driver")
            return rotation_field()
        if name in ("sigmoid", "sigmoid-saturated"):
            return sigmoid_field(m, n)
        raise GridFormatError(f"unknown builtin field {name!r}")
    with open(spec) as fh:
        data = json.load(fh)
    if data.get("kind") != "linear":
        raise GridFormatError("coeffs.json must carry kind='linear' and matrices")
    return linear_field([np.asarray(a, dtype=float) for a in data["matrices"]])


# ---------------------------------------------------------------------------
# rough path directory format


def save_rough_dir(path: str, X: RoughPath) -> None:
    os.makedirs(path, exist_ok=True)
    alpha, p, q = X.params.as_tuple
    meta = {
        "n": X.n,
        "N": X.depth,
        "level": X.grid.level,
        "horizon": X.grid.horizon,
        "alpha": alpha,
        "p": None if p == INF else p,
        "q": None if q == INF else q,
    }
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    for k in range(1, X.depth + 1):
        fieldk = X.level(k)
        with open(os.path.join(path, f"{k}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j"] + [f"c{c}" for c in range(X.n**k)])
            nn = X.grid.n
            for off in range(1, nn):
                band = fieldk.band(off)
                for i in range(nn - off):
                    writer.writerow([i, i + off]
                                    + [repr(float(v)) for v in band[i]])


def load_rough_dir(path: str) -> RoughPath:
    try:
        with open(os.path.join(path, "meta.json")) as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise GridFormatError(f"{path}: {exc}") from None
    grid = UniformGrid(meta["horizon"], meta["level"])
    params = BesovParams(
        meta["alpha"],
        INF if meta["p"] is None else meta["p"],
        INF if meta["q"] is None else meta["q"],
    )
    n, depth = int(meta["n"]), int(meta["N"])
    levels = []
    for k in range(1, depth + 1):
        fname = os.path.join(path, f"{k}.csv")
        fieldk = load_germ_csv(fname, horizon=meta["horizon"])
        if fieldk.grid != grid or fieldk.dim != n**k:
            raise GridFormatError(f"{fname}: level shape mismatch")
        levels.append(fieldk)
    base_vals = np.vstack(
        [np.zeros((1, n)), levels[0].pairs(np.zeros(grid.n - 1, dtype=int),
                                           np.arange(1, grid.n))]
    )
    base = GridPath(grid, base_vals)
    return RoughPath.from_fields(grid, params, base, levels)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_norm(args) -> int:
    path = load_path_csv(args.input)
    params = _params_from_args(args)
    value = besov_seminorm(path, *params.as_tuple, form=args.form)
    report = {
        "seminorm": value,
        "levels": besov_level_table(path, *params.as_tuple),
        "params": {"alpha": args.alpha,
                   "p": None if args.p == INF else args.p,
                   "q": None if args.q == INF else args.q,
                   "form": args.form},
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    print(f"seminorm {value:.12g}")
    return 0


def _cmd_var(args) -> int:
    path = load_path_csv(args.input)
    if args.oscillation:
        value = oscillation_variation(path, args.p)
        kind = "oscillation_variation"
    else:
        value = pvariation(path, args.p)
        kind = "pvariation"
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({kind: value, "p": args.p}, fh, indent=2)
    print(f"{kind} {value:.12g}")
    return 0


def _cmd_sew(args) -> int:
    germ = load_germ_csv(args.germ)
    inp = SewingInput(germ=germ, gamma=args.gamma, p2=args.p2, q2=args.q2,
                      endpoint=args.endpoint)
    result = sew(inp, diagnostics=True)
    cert = rate_certificate(result)
    out = {
        "integral_path": [list(map(float, row))
                          for row in result.integral.values],
        "remainder_norm": result.remainder_norm,
        "levels": result.levels,
        "slope": None if cert["slope"] == -INF else cert["slope"],
        "expected_slope": cert["expected"],
    }
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)
    print(f"remainder_norm {result.remainder_norm:.12g}")
    return 0


def _cmd_young_ode(args) -> int:
    driver = load_path_csv(args.driver)
    y0 = np.array([float(x) for x in args.y0.split(",")])
    fieldspec = _field_from_spec(args.field, len(y0), driver.dim)
    params = _params_from_args(args)
    sol = young_ode_solve(fieldspec, driver, y0, params)
    save_path_csv(args.out, sol.path)
    print(f"solved in {sum(sol.iterations)} sweeps over"
          f" {len(sol.subintervals)} subintervals")
    return 0


def _cmd_lift(args) -> int:
    params = BesovParams(args.alpha, args.p, args.q)
    grid = UniformGrid(args.horizon, args.level)
    if args.kind == "bm":
        if args.N < 2:
            raise GridFormatError("Brownian lifts start at level 2")
        X = brownian_lift(args.n, grid, args.seed, flavor=args.flavor,
                          params=params)
    elif args.kind == "fbm":
        rng = rng_for(args.seed, "fbm-lift")
        cols = [fbm_path(args.H, grid, rng).values[:, 0] for _ in range(args.n)]
        path = GridPath(grid, np.column_stack(cols))
        X = canonical_lift(path, args.N, params)
    elif args.kind == "canonical":
        if not args.input:
            raise GridFormatError("--kind canonical requires --input path.csv")
        path = load_path_csv(args.input)
        lift = geometric_lift if args.flavor == "geometric" else canonical_lift
        X = lift(path, args.N, params)
    else:
        raise GridFormatError(f"unknown lift kind {args.kind!r}")
    if args.kind == "bm" and args.N != 2:
        X = lyons_extend(X, args.N)
    save_rough_dir(args.out, X)
    print(f"chen_residual {chen_residual(X):.3e}")
    return 0


def _cmd_extend(args) -> int:
    X = load_rough_dir(args.input)
    Y = lyons_extend(X, args.N)
    save_rough_dir(args.out, Y)
    print(f"extended to level {Y.depth}; chen_residual {chen_residual(Y):.3e}")
    return 0


def _cmd_integrate(args) -> int:
    X = load_rough_dir(args.driver)
    y = load_path_csv(args.y)
    yp = load_path_csv(args.yprime)
    n = X.n
    if y.dim % n or yp.dim != y.dim * n:
        raise GridFormatError(
            f"integrand dims must be (m*{n}) and (m*{n}*{n}); got"
            f" {y.dim} and {yp.dim}"
        )
    m = y.dim // n
    cp = ControlledPath(
        X,
        y.values.reshape(X.grid.n, m, n),
        yp.values.reshape(X.grid.n, m, n, n),
    )
    z, rep = rough_integral(cp, report=True)
    save_path_csv(args.out, z.y_path())
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(rep, fh, indent=2)
    print(f"remainder_norm {rep['remainder_norm']:.12g}")
    return 0


def _cmd_rde(args) -> int:
    X = load_rough_dir(args.driver)
    y0 = np.array([float(x) for x in args.y0.split(",")])
    fieldspec = _field_from_spec(args.field, len(y0), X.n)
    sol = rde_solve(fieldspec, X, y0)
    save_path_csv(args.out, sol.path)
    dav = davie_residual(sol.controlled, fieldspec)
    report = {
        "iterations": sol.iterations,
        "subinterval_boundaries": [list(map(int, s)) for s in sol.subintervals],
        "controlled_norm": controlled_norm(sol.controlled),
        "davie_slope": None if dav["slope"] == INF else dav["slope"],
        "davie_norm": dav["norm"],
    }
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
    print(f"davie_norm {dav['norm']:.12g}")
    return 0


def _write_results_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "statistic", "estimate", "stderr", "samples"])
        for row in rows:
            writer.writerow(row)


def _cmd_mc(args) -> int:
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_json(fh.read())
    if args.experiment:
        cfg.experiment = args.experiment
    rows = []
    if cfg.experiment == "bm-ynp":
        rep = bm_besov_statistic(cfg.p, cfg.ns, cfg.level, cfg.samples, cfg.seed,
                                 dim=cfg.dim)
        for n, row in sorted(rep["per_n"].items()):
            rows.append([n, "mean", repr(row["mean"]), repr(row["stderr"]),
                         row["samples"]])
            rows.append([n, "variance", repr(row["variance"]), "",
                         row["samples"]])
            rows.append([n, "oracle_mean_window", repr(row["oracle_mean_window"]),
                         repr(row["oracle_stderr_window"]), row["samples"]])
        rows.append(["all", "variance_log2_slope", repr(rep["variance_slope"]),
                     "", cfg.samples])
    elif cfg.experiment == "fbm-ynp":
        rep = fbm_besov_statistic(cfg.H, cfg.p, cfg.ns, cfg.level, cfg.samples,
                                  cfg.seed, dim=cfg.dim)
        for n, row in sorted(rep["per_n"].items()):
            rows.append([n, "mean", repr(row["mean"]), repr(row["stderr"]),
                         row["samples"]])
            rows.append([n, "variance", repr(row["variance"]), "",
                         row["samples"]])
    elif cfg.experiment == "pprod-bdg":
        rep = pprod_bdg_experiment(
            cfg.gamma0, cfg.gamma1,
            tuple(cfg.p_tuple), tuple(cfg.q_tuple), tuple(cfg.r_tuple),
            cfg.lengths, cfg.samples, cfg.seed, kind=cfg.kind,
            coupled=cfg.coupled,
        )
        for length, row in sorted(rep["lengths"].items()):
            for key in ("ratio_p50", "ratio_p90", "ratio_p99", "ratio_mean",
                        "bdg_p50", "bdg_p99", "lr_ratio"):
                rows.append([length, key, repr(row[key]), "", row["samples"]])
    else:
        raise GridFormatError(f"unknown experiment {cfg.experiment!r}")
    _write_results_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_accept(args) -> int:
    ids = set(args.ids.split(",")) if args.ids else None
    results = run_suite(ids=ids)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, default=str)
    return 0 if all(r["passed"] for r in results) else 3


# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="besov-rough", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"besov-rough {__version__}")
    parser.add_argument(
        "--workers", type=int,
        default=int(os.environ.get("BESOV_ROUGH_WORKERS", "1")),
        help="upper bound on internal parallelism (results are"
             " worker-count independent)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("norm", help="one-parameter Besov seminorm of a path")
    sp.add_argument("--input", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--p", type=_fnum, required=True)
    sp.add_argument("--q", type=_fnum, required=True)
    sp.add_argument("--form", choices=("dyadic", "integral"), default="dyadic")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_norm)

    sp = sub.add_parser("var", help="p-variation / oscillation variation")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--oscillation", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_var)

    sp = sub.add_parser("sew", help="sew a germ CSV into integral + remainder")
    sp.add_argument("--germ", required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--p2", type=_fnum, required=True)
    sp.add_argument("--q2", type=_fnum, default=INF)
    sp.add_argument("--endpoint", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_sew)

    sp = sub.add_parser("young-ode", help="solve dY = F(Y) dX in the Young regime")
    sp.add_argument("--driver", required=True)
    sp.add_argument("--field", required=True,
                    help="builtin:<linear|rotation|sigmoid> or coeffs.json")
    sp.add_argument("--y0", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--p", type=_fnum, required=True)
    sp.add_argument("--q", type=_fnum, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_young_ode)

    sp = sub.add_parser("lift", help="construct a rough path lift")
    sp.add_argument("--kind", choices=("bm", "fbm", "canonical"), required=True)
    sp.add_argument("--H", type=float, default=0.4)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--level", type=int, default=10)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--flavor", choices=("ito", "stratonovich", "geometric"),
                    default="ito")
    sp.add_argument("--alpha", type=float, default=0.45)
    sp.add_argument("--p", type=_fnum, default=32.0)
    sp.add_argument("--q", type=_fnum, default=INF)
    sp.add_argument("--input")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_lift)

    sp = sub.add_parser("extend", help="Lyons extension of a stored rough path")
    sp.add_argument("--input", required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_extend)

    sp = sub.add_parser("integrate", help="rough integral of a controlled pair")
    sp.add_argument("--driver", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--yprime", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.set_defaults(fn=_cmd_integrate)

    sp = sub.add_parser("rde", help="solve a level-2 rough differential equation")
    sp.add_argument("--driver", required=True)
    sp.add_argument("--field", required=True)
    sp.add_argument("--y0", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.set_defaults(fn=_cmd_rde)

    sp = sub.add_parser("mc", help="Monte Carlo experiments")
    sp.add_argument("--experiment",
                    choices=("bm-ynp", "fbm-ynp", "pprod-bdg"),
                    help="optional override of the config's experiment")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_mc)

    sp = sub.add_parser("accept", help="run the acceptance suite")
    sp.add_argument("--suite", default="primary", choices=("primary",))
    sp.add_argument("--ids", help="comma-separated criterion ids, e.g. 01,07")
    sp.add_argument("--out")
    sp.set_defaults(fn=_cmd_accept)

    return parser


def _emit_error(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.fn(args)
    except (GridFormatError, OSError, json.JSONDecodeError) as exc:
        _emit_error("io", exc)
        return 1
    except RegimeError as exc:
        _emit_error("regime", exc)
        return 2
    except NonContractionError as exc:
        _emit_error("numerical", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
