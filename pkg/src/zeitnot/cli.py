"""Command-line entry point.

Data goes to stdout (or ``--out``), warnings to stderr.  Exit codes: 0 success,
2 bad arguments, 3 no crossing / no root, 4 size cap refused.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import __version__
from . import bivariant as bv
from . import duel_simulator as ds
from . import monovariant as mv
from . import report as rp
from .errors import NoCrossingError, ParameterError, SizeCapError

EXIT_OK, EXIT_USAGE, EXIT_NO_SOLUTION, EXIT_CAP = 0, 2, 3, 4
SEED_ENV = "ZEITNOT_SEED"
#: parameters that never influence the numbers and are left out of the manifest
_NOT_IN_MANIFEST = {"workers", "out", "config", "func", "usage", "histogram_out"}


class _Fail(Exception):
    def __init__(self, code, message, payload=None):
        super().__init__(message)
        self.code = code
        self.payload = payload


def fmt(x) -> str:
    """12 significant digits, locale independent."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def manifest(command: str, args: argparse.Namespace) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_IN_MANIFEST and k != "command"}
    return {
        "command": command,
        "parameters": params,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": params.get("seed"),
    }


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dump_json(man: dict, result) -> str:
    return json.dumps({"manifest": man, "result": result}, indent=2, sort_keys=True, default=_json_default) + "\n"


def dump_csv(man: dict, header, rows) -> str:
    """CSV preceded by one ``#`` line carrying the manifest as JSON."""
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(man, sort_keys=True, default=_json_default) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def load_schema(name: str) -> dict:
    """One of the shipped JSON schemas (``threshold``, ``asymptotic``, ...)."""
    with resources.files("zeitnot").joinpath("schemas", f"{name}.schema.json").open("r") as fh:
        return json.load(fh)


def parse_range(text: str) -> list:
    """``"a:b:s"`` (inclusive), ``"a,b,c"`` or a single number."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError(f"range must look like start:stop:step, got {text!r}")
        a, b, s = (float(p) for p in parts)
        if s <= 0 or b < a:
            raise ParameterError(f"bad range {text!r}")
        n = int(round((b - a) / s))
        return [round(a + i * s, 10) for i in range(n + 1)]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_int_range(text: str) -> list:
    vals = parse_range(text)
    if any(v != int(v) for v in vals):
        raise ParameterError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def read_config(path: str) -> dict:
    """``key=value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{ln}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


# --- commands ------------------------------------------------------------------------


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise _Fail(EXIT_USAGE, f"missing required option(s): {flags}")


def cmd_threshold(args):
    _need(args, "N", "alpha", "c_alpha")
    try:
        if args.model == "mono":
            p = mv.MonoModelParams(args.N, args.alpha, args.c_alpha, args.formula_mode)
            if not p.in_regime:
                _warn("c_alpha < alpha/2: outside the regime where the cutoff partition is claimed")
            rep = mv.mono_optimal_threshold(p)
        else:
            p = bv.BiModelParams(args.N, args.alpha, args.c_alpha, args.chain_mode)
            if not p.in_regime:
                _warn("c_alpha < alpha/8 (beta < 1/2): outside the claimed regime")
            rep = bv.bi_optimal_threshold(p)
    except NoCrossingError as e:
        payload = {
            "status": "no_crossing",
            "model": args.model,
            "N": args.N,
            "flip": e.flip,
            "profile": [pr.to_dict() for pr in e.profile],
        }
        raise _Fail(EXIT_NO_SOLUTION, str(e), payload) from None
    d = rep.to_dict()
    if args.format == "csv":
        keys = ["model", "mode", "N", "l_star", "z", "continue_before", "stop_before", "continue_at",
                "stop_at", "partition_ok", "in_regime", "status"]
        return "csv", keys, [[d[k] for k in keys]]
    return "json", d


def _asym_payload(sol, extra=None):
    d = sol.to_dict()
    if extra:
        d.update(extra)
    return d


def cmd_asymptotic(args):
    if args.model == "bi":
        beta = args.beta
        if beta is None:
            _need(args, "alpha", "c_alpha")
            beta = 4 * args.c_alpha / args.alpha
        if beta < 0.5:
            _warn(f"beta = {beta} < 1/2: outside the claimed regime")
        sol = bv.bi_solve_asymptotic(beta, args.grid_step)
        z = sol.roots[0] if sol.roots else None
        ref = bv.PUBLISHED_TABLE1.get(round(beta, 10))
        result = {
            "model": "bi",
            "beta": beta,
            "solutions": {"A": _asym_payload(sol)},
            "comparison": {"beta": beta, "z_paper": ref, "z_computed": z,
                           "deviation": None if (z is None or ref is None) else z - ref},
        }
        statuses = [sol.status]
    else:
        _need(args, "alpha", "c_alpha")
        if args.c_alpha < args.alpha / 2:
            _warn("c_alpha < alpha/2: outside the claimed regime")
        interps = ("A", "B") if args.interp == "both" else (args.interp,)
        sols = {i: mv.mono_solve_asymptotic(args.c_alpha, args.alpha, i, args.grid_step) for i in interps}
        result = {
            "model": "mono",
            "alpha": args.alpha,
            "c_alpha": args.c_alpha,
            "solutions": {
                i: _asym_payload(
                    s,
                    {"published": mv.PUBLISHED_ROOT,
                     "deviation": s.roots[0] - mv.PUBLISHED_ROOT if s.roots else None},
                )
                for i, s in sols.items()
            },
        }
        statuses = [s.status for s in sols.values()]
    if all(s != "ok" for s in statuses):
        raise _Fail(EXIT_NO_SOLUTION, "no root found", result)
    if args.format == "csv":
        rows = []
        for i, s in result["solutions"].items():
            for r, res in zip(s["roots"], s["residuals"]):
                rows.append([result["model"], i, r, res, s["count"]])
        return "csv", ["model", "interpretation", "root", "residual", "count"], rows
    return "json", result


def _duel_config(args):
    _need(args, "N")
    l1 = args.l1 if args.l1 is not None else 2
    l2 = args.l2 if args.l2 is not None else 2
    return ds.DuelConfig(
        N=args.N, model=args.model, l1=l1, l2=l2, alpha=args.alpha, c_alpha=args.c_alpha,
        trials=args.trials, seed=args.seed, engine=args.engine, reading=args.reading,
    )


def cmd_simulate(args):
    cfg = _duel_config(args)
    rep = ds.run(cfg, workers=args.workers)
    if args.histogram_out:
        with open(args.histogram_out, "w", newline="") as fh:
            fh.write(ds.histogram_csv(rep))
    d = rep.to_dict()
    if args.format == "csv":
        keys = ["expected_payoff_1", "expected_payoff_2", "std_error_1", "std_error_2", "win1", "win2",
                "both_rewarded", "both_found_tie", "neither", "mean_fee_1", "mean_fee_2"]
        return "csv", keys, [[d[k] for k in keys]]
    return "json", d


def cmd_table1(args):
    betas = parse_range(args.betas) if args.betas else None
    rows = bv.table1(betas)
    if args.format == "json":
        return "json", {"rows": [r.to_dict() for r in rows]}
    return "csv", ["beta", "z_paper", "z_computed", "deviation"], [
        [r.beta, r.z_paper, r.z_computed, r.deviation] for r in rows
    ]


def cmd_sweep(args):
    rows = []
    if args.N_range:
        _need(args, "alpha", "c_alpha")
        header = ["N", "l_star", "flip", "z"]
        for N in parse_int_range(args.N_range):
            if args.model == "mono":
                s = mv.mono_threshold_scan(mv.MonoModelParams(N, args.alpha, args.c_alpha, args.formula_mode))
            else:
                s = bv.bi_threshold_scan(bv.BiModelParams(N, args.alpha, args.c_alpha, args.chain_mode))
            rows.append([N, s.l_star, s.flip, None if s.l_star is None else s.l_star / N])
    elif args.model == "bi":
        if not args.beta:
            raise _Fail(EXIT_USAGE, "bi sweep needs --beta start:stop:step (or --N-range)")
        header = ["beta", "z_computed", "root_count", "z_paper"]
        for b in parse_range(args.beta):
            if b < 0.5:
                _warn(f"beta = {b} < 1/2: outside the claimed regime")
            sol = bv.bi_solve_asymptotic(b)
            rows.append([b, sol.roots[0] if sol.roots else None, sol.count, bv.PUBLISHED_TABLE1.get(round(b, 10))])
    else:
        if not args.c_alpha_range:
            raise _Fail(EXIT_USAGE, "mono sweep needs --c-alpha-range start:stop:step (or --N-range)")
        _need(args, "alpha")
        header = ["c_alpha", "z_A", "z_B", "count_A", "count_B"]
        for c in parse_range(args.c_alpha_range):
            a_ = mv.mono_solve_asymptotic(c, args.alpha, "A")
            b_ = mv.mono_solve_asymptotic(c, args.alpha, "B")
            rows.append([c, a_.roots[0] if a_.roots else None, b_.roots[0] if b_.roots else None, a_.count, b_.count])
    if args.format == "json":
        return "json", {"columns": header, "rows": [dict(zip(header, r)) for r in rows]}
    return "csv", header, rows


def cmd_report(args):
    return "json", rp.build_report()


# --- parser ------------------------------------------------------------------------


def _common(p, fmt_default="json"):
    p.add_argument("--format", choices=("json", "csv"), default=fmt_default)
    p.add_argument("--out", help="write the output here instead of stdout")


def _model_params(p, with_n=True):
    if with_n:
        p.add_argument("--N", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c-alpha", dest="c_alpha", type=float)
    p.add_argument("--formula-mode", choices=mv.FORMULA_MODES, default=mv.REDERIVED)
    p.add_argument("--chain-mode", choices=bv.CHAIN_MODES, default=bv.ROW_NORMALIZED)


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise _Fail(EXIT_USAGE, f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeitnot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value file; command-line flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="optimal cutoff for a finite portfolio")
    p.add_argument("--model", choices=("mono", "bi"), default="mono")
    _model_params(p)
    _common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("asymptotic", help="large-portfolio cutoff fraction")
    p.add_argument("--model", choices=("mono", "bi"), default="mono")
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c-alpha", dest="c_alpha", type=float)
    p.add_argument("--interp", choices=("A", "B", "both"), default="both")
    p.add_argument("--grid-step", type=float, default=1e-4)
    _common(p)
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("simulate", help="expected payoffs of a duel between two cutoff rules")
    p.add_argument("--model", choices=("mono", "bi"), default="mono")
    p.add_argument("--N", type=int)
    p.add_argument("--l1", type=int)
    p.add_argument("--l2", type=int)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--c-alpha", dest="c_alpha", type=float, default=0.25)
    p.add_argument("--engine", choices=(ds.EXACT, ds.MONTE_CARLO), default=ds.EXACT)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--reading", choices=(ds.READ_OR, ds.READ_AND), default=ds.READ_OR)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--histogram-out", help="write stop-time histograms as CSV here")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table1", help="limit cutoff fraction per beta, with published values")
    p.add_argument("--betas", help="start:stop:step or comma list (default 0.5..1.5)")
    _common(p, "csv")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("sweep", help="solver runs over a parameter grid")
    p.add_argument("--model", choices=("mono", "bi"), default="bi")
    p.add_argument("--beta", help="start:stop:step")
    p.add_argument("--c-alpha-range", help="start:stop:step")
    p.add_argument("--N-range", dest="N_range", help="start:stop:step of portfolio sizes")
    _model_params(p, with_n=False)
    _common(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="full comparison report as one JSON document")
    _common(p)
    p.set_defaults(func=cmd_report)

    for sp in sub.choices.values():
        sp.set_defaults(usage=sp.format_usage())
    return parser


def _apply_config(parser, argv):
    """Feed config-file values in as subcommand defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            types = {a.dest: a.type for a in sp._actions}
            defaults = {}
            for k, v in values.items():
                if k in types:
                    t = types[k]
                    defaults[k] = t(v) if t else v
            sp.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, ParameterError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        out = args.func(args)
        code, err = EXIT_OK, None
    except _Fail as f:
        if f.code == EXIT_USAGE:
            sys.stderr.write(args.usage)
            print(f"error: {f}", file=sys.stderr)
            return EXIT_USAGE
        out, code, err = ("json", f.payload) if f.payload is not None else None, f.code, str(f)
    except SizeCapError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (ParameterError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if err:
        print(f"error: {err}", file=sys.stderr)
    if out is not None:
        man = manifest(args.command, args)
        text = dump_json(man, out[1]) if out[0] == "json" else dump_csv(man, out[1], out[2])
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
