"""Command-line front end: ``python -m psi_approx <command> ...``.

Commands
--------
psi-show     characteristics eta, T, mu of a weight at given points
error        class error of one or more (n, p, method) tuples
sweep        same as ``error``, intended for long ``--n`` ranges
compare      several methods on the same tuples, with error ratios
kernel-dump  deviation kernel samples on a uniform grid

Exit status is 0 on success, 2 on configuration errors and 3 when a
numerical procedure does not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import FOUR_OVER_PI2, compute_A, vp_main_term
from .errors import NonConvergenceError, PsiApproxError
from .oracle import DeviationKernel, class_error, guard_width, kernel_dump
from .psi_catalog import Exp, PsiSpec, characteristics, classify, parse_psi
from .summation import build_multipliers

CSV_HEADER = ("n", "p", "method", "error", "main_term", "A", "remainder", "err_estimate",
              "runtime_ms")
P_RULES = ("const", "half_n", "t_of_n", "one")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(PsiApproxError, ValueError):
    pass


# -- parsing helpers ------------------------------------------------------------


def parse_n_list(text: str) -> list[int]:
    """``32``, ``16,32,64``, ``a:b`` (doubling), ``a:b:geomK`` (K geometric points), ``a:b:linS``."""
    text = text.strip()
    if ":" not in text:
        try:
            values = [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad --n value {text!r}") from None
    else:
        parts = text.split(":")
        try:
            a, b = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ConfigError(f"bad --n range {text!r}") from None
        mode = parts[2] if len(parts) > 2 else ""
        if a < 1 or b < a:
            raise ConfigError(f"--n range needs 1 <= a <= b, got {text!r}")
        if mode == "":
            values = []
            v = a
            while v <= b:
                values.append(v)
                v *= 2
        elif mode.startswith("geom"):
            try:
                k = int(mode[4:])
            except ValueError:
                raise ConfigError(f"bad geometric count in {text!r}") from None
            if k < 1:
                raise ConfigError("geometric count must be positive")
            values = [a] if k == 1 else [round(a * (b / a) ** (i / (k - 1))) for i in range(k)]
        elif mode.startswith("lin"):
            try:
                step = int(mode[3:])
            except ValueError:
                raise ConfigError(f"bad linear step in {text!r}") from None
            if step < 1:
                raise ConfigError("linear step must be positive")
            values = list(range(a, b + 1, step))
        else:
            raise ConfigError(f"unknown range mode {mode!r} (use geomK or linS)")
    values = sorted(set(values))
    if not values or values[0] < 1:
        raise ConfigError("--n needs positive integers")
    return values


@dataclass(frozen=True)
class MethodSpec:
    tag: str
    name: str
    s: float | None = None
    phi_file: str | None = None

    def phi_table(self, n_max: int):
        if self.phi_file is None:
            return None
        table = load_phi_table(self.phi_file)
        if table.size < n_max + 1:
            raise ConfigError(f"{self.phi_file} lists phi(0..{table.size - 1}); need up to {n_max}")
        return table


def parse_method(text: str) -> MethodSpec:
    text = text.strip()
    head, _, opts = text.partition(":")
    kv = {}
    for item in filter(None, opts.split(";")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"bad method option {item!r} in {text!r}")
        kv[key.strip()] = val.strip()
    head = head.lower()
    if head in ("u", "vp", "fourier", "fejer") and not kv:
        name = {"u": "U_psi", "vp": "vallee_poussin", "fourier": "fourier", "fejer": "fejer"}[head]
        return MethodSpec(text, name)
    if head == "zygmund" and set(kv) == {"s"}:
        try:
            s = float(kv["s"])
        except ValueError:
            raise ConfigError(f"bad zygmund exponent in {text!r}") from None
        return MethodSpec(text, "zygmund", s=s)
    if head == "genz" and set(kv) <= {"file"}:
        return MethodSpec(text, "gen_zygmund", phi_file=kv.get("file"))
    raise ConfigError(f"unknown method {text!r}")


def load_phi_table(path) -> np.ndarray:
    """Read ``phi(k)`` from a CSV with columns ``k,phi`` (header optional)."""
    rows = []
    try:
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((int(rec[0]), float(rec[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ConfigError(f"{path}: bad row {rec!r}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    rows.sort()
    ks = [k for k, _ in rows]
    if ks != list(range(len(ks))):
        raise ConfigError(f"{path}: k must run 0, 1, 2, ... without gaps")
    return np.array([v for _, v in rows])


def parse_p_rule(text: str):
    """``const:K`` (or a bare integer), ``half_n``, ``t_of_n``, ``one``."""
    head, _, arg = text.partition(":")
    if head.isdigit():
        return ("const", int(head))
    if head == "const":
        try:
            return ("const", int(arg))
        except ValueError:
            raise ConfigError(f"bad constant p in {text!r}") from None
    if head in ("half_n", "t_of_n", "one") and not arg:
        return (head, None)
    raise ConfigError(f"unknown p rule {text!r}; expected one of {P_RULES}")


def resolve_p(rule, psi: PsiSpec, n: int, method: str) -> int:
    if method == "fourier":
        return 1
    if method in ("fejer", "zygmund", "gen_zygmund"):
        return n
    kind, arg = rule
    if kind == "const":
        p = arg
        if not 1 <= p <= n:
            raise ConfigError(f"p={p} is outside [1, {n}]")
        return p
    if kind == "one":
        return 1
    if kind == "half_n":
        return max(1, n // 2)
    T = characteristics(psi, float(n)).T
    return min(n, max(1, int(round(T))))


# -- computation ----------------------------------------------------------------


@dataclass
class Row:
    n: int
    p: int
    method: str
    error: float
    main_term: float
    A: float
    remainder: float
    err_estimate: float
    runtime_ms: float

    def cells(self):
        return [str(self.n), str(self.p), self.method] + [
            _fmt(v) for v in (self.error, self.main_term, self.A, self.remainder,
                              self.err_estimate, self.runtime_ms)
        ]


def _fmt(x: float) -> str:
    return repr(float(x))


def _prediction(psi: PsiSpec, n: int, p: int, mspec: MethodSpec):
    """``(variant, vp_term)``: which main term applies to this method, if any."""
    if mspec.name == "U_psi":
        return "U", None
    if mspec.name == "fourier":
        return "fourier", None
    if mspec.name == "gen_zygmund" and mspec.phi_file is None:
        return "zygmund", None
    if mspec.name == "vallee_poussin" and isinstance(psi, Exp) and psi.r == 1:
        return None, psi.scale * vp_main_term(psi.alpha, n, p)
    return None, None


def compute_row(psi: PsiSpec, beta: float, n: int, p: int, mspec: MethodSpec, tol: float,
                n_max: int) -> Row:
    t0 = time.perf_counter()
    res = class_error(psi, beta, n, p, tol, method=mspec.name, s=mspec.s,
                      phi_table=mspec.phi_table(n_max), full_output=True)
    runtime = 1e3 * (time.perf_counter() - t0)
    variant, vp_term = _prediction(psi, n, p, mspec)
    A = main = rem = math.nan
    if variant is not None:
        est = compute_A(variant, psi, n, p)
        A, main = est.A, est.main_term
        measured = res.value / est.psi_n if est.psi_n > 0 else res.ratio
        rem = measured - FOUR_OVER_PI2 * A
    elif vp_term is not None:
        main = vp_term
    return Row(n, p, mspec.tag, res.value, main, A, rem, res.err_estimate, runtime)


def _workers() -> int:
    cores = os.cpu_count() or 1
    env = os.environ.get("PSI_APPROX_THREADS")
    if env:
        try:
            return max(1, min(cores, int(env))) if int(env) > 0 else cores
        except ValueError:
            raise ConfigError(f"PSI_APPROX_THREADS must be an integer, got {env!r}") from None
    return cores


def run_tuples(psi, beta, tuples, tol, n_max) -> list[Row]:
    """Evaluate ``(n, p, MethodSpec)`` tuples in a worker pool.

    Rows come back in the order of ``tuples`` whatever the completion order.
    """
    workers = min(_workers(), max(1, len(tuples)))

    def job(tp):
        return compute_row(psi, beta, tp[0], tp[1], tp[2], tol, n_max)

    if workers == 1:
        return [job(tp) for tp in tuples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, tuples))


# -- output ---------------------------------------------------------------------


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def write_manifest(path: Path, config: dict, tolerances: dict, rows_written: int,
                   started_at: str, extra: dict | None = None) -> None:
    doc = {
        "config": config,
        "tolerances": tolerances,
        "version": __version__,
        "started_at": started_at,
        "rows_written": rows_written,
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def print_table(header, rows, out=None) -> None:
    out = sys.stdout if out is None else out
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(header)]
    line = "  ".join(str(h).rjust(w) for h, w in zip(header, widths))
    print(line, file=out)
    for r in rows:
        print("  ".join(str(c).rjust(w) for c, w in zip(r, widths)), file=out)


def _short(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.10g}"


# -- commands -------------------------------------------------------------------


def _common_config(args) -> dict:
    return {
        "command": args.command,
        "psi": args.psi.to_string(),
        "beta": args.beta,
        "tol": args.tol,
        "out": str(args.out),
    }


def _tolerances(args, n_list) -> dict:
    return {
        "quadrature_rtol": args.tol,
        "eps_tail_relative_to_psi_n": args.tol / 100.0,
        "singular_window_half_width": {str(n): guard_width(n) for n in n_list},
    }


def cmd_psi_show(args) -> int:
    ts = [float(v) for v in args.t.split(",")]
    rows = []
    for t in ts:
        ch = characteristics(args.psi, t)
        rows.append([_short(ch.t), _short(ch.psi), _short(ch.eta), _short(ch.T), _short(ch.mu)])
    header = ("t", "psi", "eta", "T", "mu")
    print_table(header, rows)
    if args.classify:
        lo, hi = args.psi.t_min, max(max(ts), 2 * args.psi.t_min)
        c = classify(args.psi, (lo, hi))
        print(f"on [{lo:g}, {hi:g}]: M_C={c.in_Mc} (mu in [{c.mc_min:.4g}, {c.mc_max:.4g}])"
              f"  M_inf+={c.in_Minf_plus}  F={c.in_F_numeric}")
    if args.out is not None:
        started = _now()
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(args.out / "psi_show.csv", header, rows)
        cfg = {"command": args.command, "psi": args.psi.to_string(), "t": ts}
        write_manifest(args.out / "manifest.json", cfg, {"inverse_rtol": 1e-12}, len(rows), started)
    return EXIT_OK


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_errors(args) -> int:
    started = _now()
    methods = args.methods
    if args.command == "compare" and len(methods) < 2:
        raise ConfigError("compare needs at least two methods (--methods a,b)")
    n_list = args.n
    n_max = n_list[-1]
    tuples = []
    for n in n_list:
        for m in methods:
            p = resolve_p(args.p_rule, args.psi, n, m.name)
            build_multipliers(m.name, n, p, psi=args.psi, s=m.s, phi_table=m.phi_table(n_max))
            tuples.append((n, p, m))
    rows = run_tuples(args.psi, args.beta, tuples, args.tol, n_max)
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "results.csv", CSV_HEADER, [r.cells() for r in rows])
    cfg = _common_config(args)
    cfg.update({
        "n_list": n_list,
        "p_rule": {"rule": args.p_rule[0], "value": args.p_rule[1]},
        "methods": [m.tag for m in methods],
    })
    per_row = [{"n": r.n, "p": r.p, "method": r.method, "err_estimate": r.err_estimate}
               for r in rows]
    write_manifest(args.out / "manifest.json", cfg, _tolerances(args, n_list), len(rows), started,
                   {"row_error_estimates": per_row})
    header = ("n", "p", "method", "error", "error/psi(n)", "A", "remainder", "err_est", "ms")
    table = []
    for r in rows:
        ratio = r.error / float(args.psi(float(r.n))) if float(args.psi(float(r.n))) > 0 else math.nan
        table.append([r.n, r.p, r.method, _short(r.error), _short(ratio), _short(r.A),
                      _short(r.remainder), f"{r.err_estimate:.2e}", f"{r.runtime_ms:.0f}"])
    print_table(header, table)
    if args.command == "compare":
        _print_ratios(args, rows, methods)
    return EXIT_OK


def _print_ratios(args, rows, methods) -> None:
    base = methods[0].tag
    by_key = {(r.n, r.method): r for r in rows}
    out = []
    for n in args.n:
        num = by_key[(n, base)]
        for m in methods[1:]:
            den = by_key[(n, m.tag)]
            ratio = num.error / den.error if den.error > 0 else math.nan
            out.append([str(n), str(num.p), str(den.p), base, m.tag, _fmt(ratio)])
    header = ("n", "p_num", "p_den", "numerator", "denominator", "ratio")
    print()
    print_table(header, out)
    write_csv(args.out / "ratios.csv", header, out)


def cmd_kernel_dump(args) -> int:
    started = _now()
    if len(args.n) != 1 or len(args.methods) != 1:
        raise ConfigError("kernel-dump takes a single --n and a single --method")
    n, m = args.n[0], args.methods[0]
    p = resolve_p(args.p_rule, args.psi, n, m.name)
    K = DeviationKernel.for_method(args.psi, args.beta, n, p, m.name, s=m.s,
                                   phi_table=m.phi_table(n), eps_tail=args.tol / 100.0)
    t, k = kernel_dump(K, args.grid)
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "kernel.csv", ("t", "K"), [[_fmt(a), _fmt(b)] for a, b in zip(t, k)])
    cfg = _common_config(args)
    cfg.update({"n": n, "p": p, "method": m.tag, "grid": args.grid})
    write_manifest(args.out / "manifest.json", cfg, _tolerances(args, [n]), len(t), started)
    finite = np.isfinite(k)
    print(f"wrote {len(t)} samples to {args.out / 'kernel.csv'} "
          f"(max |K| = {np.max(np.abs(k[finite])):.6g})")
    return EXIT_OK


# -- argument parser ------------------------------------------------------------


def _psi_arg(text):
    try:
        return parse_psi(text)
    except PsiApproxError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _n_arg(text):
    try:
        return parse_n_list(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _methods_arg(text):
    try:
        return [parse_method(m) for m in text.split(",") if m.strip()]
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _p_rule_arg(text):
    try:
        return parse_p_rule(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _tol_arg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance {text!r}") from None
    if not 0 < v <= 0.1:
        raise argparse.ArgumentTypeError("tol must lie in (0, 0.1]")
    return v


def _grid_arg(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid size {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psi-approx", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    show = sub.add_parser("psi-show", help="eta, T and mu of a weight")
    show.add_argument("--psi", type=_psi_arg, required=True)
    show.add_argument("--t", required=True, help="comma-separated points")
    show.add_argument("--classify", action="store_true", help="also report class membership")
    show.add_argument("--out", type=Path, default=None)

    def operator_args(p, *, compare=False, dump=False):
        p.add_argument("--psi", type=_psi_arg, required=True)
        p.add_argument("--beta", type=float, default=0.0)
        p.add_argument("--n", type=_n_arg, required=True,
                       help="N, list a,b,c, or range a:b (doubling), a:b:geomK, a:b:linS")
        grp = p.add_mutually_exclusive_group()
        grp.add_argument("--p", dest="p_rule", type=lambda s: ("const", _posint(s)))
        grp.add_argument("--p-rule", dest="p_rule", type=_p_rule_arg,
                         help="const:K | half_n | t_of_n | one")
        p.add_argument("--method", "--methods", dest="methods", type=_methods_arg,
                       default=None if compare else [MethodSpec("u", "U_psi")],
                       required=compare,
                       help="u | vp | fourier | fejer | zygmund:s=V | genz[:file=PHI.csv]")
        p.add_argument("--tol", type=_tol_arg, default=1e-8)
        p.add_argument("--out", type=Path, default=Path("."))
        if dump:
            p.add_argument("--grid", type=_grid_arg, default=4096)
        p.set_defaults(p_rule=("one", None))

    operator_args(sub.add_parser("error", help="class error of single tuples"))
    operator_args(sub.add_parser("sweep", help="class error over an n range"))
    operator_args(sub.add_parser("compare", help="several methods side by side"), compare=True)
    operator_args(sub.add_parser("kernel-dump", help="sample the deviation kernel"), dump=True)
    return parser


def _posint(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad p {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("p must be positive")
    return v


_COMMANDS = {
    "psi-show": cmd_psi_show,
    "error": cmd_errors,
    "sweep": cmd_errors,
    "compare": cmd_errors,
    "kernel-dump": cmd_kernel_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PsiApproxError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
