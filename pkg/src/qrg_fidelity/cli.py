"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 domain error, 3 failed
verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from . import itf, oracle, scaling, xxz
from .config import FORMATS, RunConfig, load_config
from .errors import (ConfigError, DegeneracyError, DomainError, FitError, QrgError,
                     RegimeNotSpannedError)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VERIFY = 0, 1, 2, 3

CSV_HEADER = ("model", "coupling", "delta", "N", "Ndelta", "log_f", "f", "chi", "error")
FLOW_HEADER = ("level", "coupling", "coupling_minus", "coupling_plus", "J", "blocks",
               "log_overlap")
COLUMN_LEGEND = """\
model     itf or xxz
coupling  g (itf) or Delta (xxz); with an offset index k the compared pair is
          (coupling - (k+1)*delta, coupling - k*delta), mirrored for side=+1
delta     perturbation
N         number of sites
Ndelta    regime indicator N*|delta|
log_f     natural log of the ground-state fidelity
f         ground-state fidelity, 0 when exp(log_f) underflows
chi       fidelity susceptibility when requested, blank otherwise
error     domain error for this row, blank otherwise
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- formatting -----------------------------------------------------------------

def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value + 0.0, ".17g")  # no "-0"
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return fmt(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dump_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def row_record(row: scaling.SweepRow) -> dict[str, Any]:
    return {"model": row.model, "coupling": row.coupling, "delta": row.delta, "N": row.n_sites,
            "Ndelta": row.n_delta, "log_f": row.log_f, "f": row.f, "chi": row.chi,
            "error": row.error}


def render_table(records: Sequence[dict[str, Any]], header: Sequence[str], fmt_name: str) -> str:
    if fmt_name == "json":
        return dump_json([{h: r.get(h) for h in header} for r in records])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in records:
        writer.writerow([fmt(r.get(h)) for h in header])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc.strerror or exc}") from exc


# -- argument helpers ---------------------------------------------------------

def _add_point_args(p: argparse.ArgumentParser, *, delta: bool = True, size: bool = True,
                    delta_default: float | None = None) -> None:
    p.add_argument("--model", choices=scaling.MODELS, required=True)
    p.add_argument("--g", type=float, help="transverse-field ratio (itf)")
    p.add_argument("--Delta", type=float, help="anisotropy (xxz)")
    p.add_argument("--J", type=float, default=1.0)
    if delta:
        p.add_argument("--delta", type=float, default=delta_default)
    if size:
        group = p.add_mutually_exclusive_group()
        group.add_argument("--N", type=int, help="number of sites")
        group.add_argument("--ell", type=int, help="itf level count, N = 2^(ell+1)")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv")


def _coupling(args) -> float:
    if args.model == "itf":
        if args.Delta is not None:
            raise UsageError("--Delta applies to the xxz model; use --g")
        if args.g is None:
            raise UsageError("--g is required for the itf model")
        return args.g
    if args.g is not None:
        raise UsageError("--g applies to the itf model; use --Delta")
    if args.Delta is None:
        raise UsageError("--Delta is required for the xxz model")
    return args.Delta


def _sites(args) -> int:
    if args.ell is not None:
        if args.model != "itf":
            raise UsageError("--ell is only available for the itf model")
        return itf.sites_from_ell(args.ell)
    if args.N is None:
        raise UsageError("one of --N or --ell is required")
    if args.model == "itf":
        itf.ell_from_sites(args.N)
    return args.N


def _require_delta(args) -> float:
    if args.delta is None:
        raise UsageError("--delta is required")
    return args.delta


# -- subcommands --------------------------------------------------------------

def cmd_fidelity(args) -> int:
    x, delta, n = _coupling(args), _require_delta(args), _sites(args)
    grid = scaling.SweepGrid(args.model, [x], [delta], [n], k=args.k, side=args.side, J=args.J)
    row = scaling.sweep_fidelity(grid, threads=1)[0]
    if row.error:
        raise DomainError(row.error)
    emit(render_table([row_record(row)], CSV_HEADER, args.format), args.out)
    return EXIT_OK


def cmd_chi(args) -> int:
    x, n = _coupling(args), _sites(args)
    record = {"model": args.model, "coupling": x, "delta": None, "N": n, "Ndelta": None,
              "log_f": None, "f": None, "error": None}
    detail: dict[str, Any] = {}
    if args.model == "itf":
        res = itf.itf_susceptibility(x, itf.ell_from_sites(n), args.chi_mode)
        record["chi"] = res.chi
        detail = {"mode": res.mode, "boundary": res.boundary, "bulk": list(res.bulk),
                  "reference_boundary_N2_over_32": res.reference_boundary,
                  "boundary_over_reference": res.boundary / res.reference_boundary}
    else:
        res = xxz.xxz_susceptibility(x, n)
        if isinstance(res, xxz.Divergence):
            record["chi"] = math.inf
            detail = {"divergence_at": res.at, "rate": res.rate}
        else:
            record["chi"] = res
    if args.format == "json":
        emit(dump_json({**{h: record.get(h) for h in CSV_HEADER}, **detail}), args.out)
    else:
        emit(render_table([record], CSV_HEADER, "csv"), args.out)
    return EXIT_OK


def cmd_flow(args) -> int:
    x, n = _coupling(args), _sites(args)
    delta = args.delta or 0.0
    if args.model == "itf":
        trace = itf.itf_fidelity(x, delta, itf.ell_from_sites(n), args.J).trace
        extra = {"fixed_point": itf.itf_classify_fixed_point(x).value}
    else:
        ell = xxz.ell_from_sites(n)
        if ell is None:
            raise DomainError(f"xxz flow needs N = 3^(ell+1), got N={n}")
        trace = xxz.xxz_trace(x, delta, ell, args.J)
        extra = {}
    records = [{"level": lv.level, "coupling": lv.coupling, "coupling_minus": lv.coupling_minus,
                "coupling_plus": lv.coupling_plus, "J": lv.J, "blocks": lv.blocks,
                "log_overlap": lv.log_overlap} for lv in trace.levels]
    if args.format == "json":
        emit(dump_json({"model": args.model, "coupling": x, "delta": delta, "N": n,
                        "ell": trace.ell, "log_f": trace.log_f, **extra, "levels": records}),
             args.out)
    else:
        emit(render_table(records, FLOW_HEADER, "csv"), args.out)
    return EXIT_OK


def _run_output(cfg: RunConfig, out_arg: str | None, multi: bool, index: int) -> str | None:
    into_dir = out_arg is not None and Path(out_arg).is_dir()
    if not multi and not into_dir:
        return out_arg or cfg.out
    name = cfg.out or f"{cfg.name or f'run{index}'}.{cfg.format}"
    if out_arg is None:
        return name
    return str(Path(out_arg) / Path(name).name)


def cmd_sweep(args) -> int:
    if args.config is None:
        raise UsageError("sweep requires --config")
    runs = load_config(args.config)
    grids = [cfg.grid() for cfg in runs]
    if any(g.is_empty for g in grids):
        raise UsageError("config describes an empty grid; nothing written")
    multi = len(runs) > 1
    threads = scaling.thread_count()
    outputs = []
    for i, (cfg, grid) in enumerate(zip(runs, grids)):
        fmt_name = args.format or cfg.format
        rows = scaling.sweep_fidelity(grid, threads=threads)
        out = _run_output(cfg, args.out, multi, i)
        emit(render_table([row_record(r) for r in rows], CSV_HEADER, fmt_name), out)
        if out is not None:
            emit(COLUMN_LEGEND, out + ".columns.txt")
        outputs.append(out)
    if multi:
        sys.stderr.write("".join(f"wrote {o}\n" for o in outputs))
    return EXIT_OK


def read_rows(path: str) -> list[scaling.SweepRow]:
    """Parse a CSV written by ``sweep``; any deviation from the schema is a usage error."""
    def num(text: str, kind=float):
        return None if text == "" else kind(text)

    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_HEADER:
                raise UsageError(f"{path}: header must be {','.join(CSV_HEADER)}")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(CSV_HEADER):
                    raise UsageError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
                try:
                    rows.append(scaling.SweepRow(
                        model=rec[0], coupling=float(rec[1]), delta=num(rec[2]),
                        n_sites=int(rec[3]), n_delta=num(rec[4]), log_f=num(rec[5]),
                        f=num(rec[6]), chi=num(rec[7]), error=rec[8] or None))
                except ValueError as exc:
                    raise UsageError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return rows


def cmd_fit(args) -> int:
    curves = {path: read_rows(path) for path in args.input}
    report: dict[str, Any] = {"axis": "N" if args.nu else args.axis, "curves": {}}
    if not args.nu:
        regimes = args.regime or ["small_size", "large_size"]
        for path, rows in curves.items():
            entry = {reg: scaling.fit_rows(rows, args.axis, reg).to_dict() for reg in regimes}
            if args.crossover:
                good = [r for r in rows if r.error is None]
                entry["crossover"] = scaling.detect_crossover(
                    [r.n_delta for r in good], scaling.neg_log_fidelity(r.log_f for r in good)
                ).to_dict()
            report["curves"][path] = entry
        if len(curves) >= 3 and "large_size" in regimes:
            flagged = scaling.flag_anomalous(
                {p: scaling.FitResult(**{**c["large_size"], "window": tuple(c["large_size"]["window"])})
                 for p, c in report["curves"].items()})
            report["anomalous_large_size"] = sorted(flagged)
    else:
        for path, rows in curves.items():
            pts = [(r.n_sites, r.chi) for r in rows if r.error is None and r.chi is not None]
            if not pts:
                raise UsageError(f"{path}: no chi values; sweep with \"chi\": true")
            est = scaling.extract_nu([p[0] for p in pts], [p[1] for p in pts])
            report["curves"][path] = {"nu": est.to_dict()}
    emit(dump_json(report), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    x = _coupling(args)
    delta = args.delta if args.delta is not None else 0.0
    try:
        emb = oracle.verify_embedding_identities(args.model, x, delta,
                                                 omega_branch=args.omega_branch, J=args.J)
        reports = [emb]
        if not args.skip_renormalized:
            reports.append(oracle.verify_renormalized_hamiltonian(args.model, x, args.J))
    except DegeneracyError as exc:
        emit(dump_json({"model": args.model, "coupling": x, "delta": delta, "pass": False,
                        "error": str(exc), "checks": []}), args.out)
        return EXIT_VERIFY
    checks = [c.to_dict() for r in reports for c in r.checks]
    diagnostics = {k: v for r in reports for k, v in r.diagnostics.items()}
    passed = all(r.passed for r in reports)
    emit(dump_json({"model": args.model, "coupling": x, "delta": delta,
                    "omega_branch": args.omega_branch if args.model == "xxz" else None,
                    "pass": passed, "checks": checks, "diagnostics": diagnostics}), args.out)
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_limit(args) -> int:
    if args.model != "itf":
        raise UsageError("limit is defined for the itf model only")
    g = _coupling(args)
    value = (itf.itf_fidelity_thermo_limit(g) if args.tolerance is None
             else itf.itf_fidelity_thermo_limit_near(g, args.tolerance))
    if args.format == "json":
        emit(dump_json({"model": "itf", "coupling": g, "limit": value}), args.out)
    else:
        emit(fmt(value) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrg-fidelity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fidelity", help="ground-state fidelity at one point")
    _add_point_args(p)
    p.add_argument("--k", type=int, help="offset index: compare (x-(k+1)d, x-kd)")
    p.add_argument("--side", type=int, choices=(-1, 1), default=-1)
    _add_output_args(p)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("chi", help="fidelity susceptibility")
    _add_point_args(p, delta=False)
    p.add_argument("--chi-mode", choices=itf.CHI_MODES, default="fd-calibrated")
    _add_output_args(p)
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("flow", help="per-level RG trace")
    _add_point_args(p, delta_default=0.0)
    _add_output_args(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("sweep", help="evaluate a configured grid")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output file, or directory for multi-run configs")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="log-log fits on sweep output")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--axis", choices=("delta", "N"), default="delta")
    p.add_argument("--regime", action="append", choices=scaling.REGIMES)
    p.add_argument("--crossover", action="store_true", help="also locate the crossover")
    p.add_argument("--nu", action="store_true", help="extract nu from the chi column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="exact-diagonalization identity checks")
    _add_point_args(p, size=False)
    p.add_argument("--omega-branch", choices=xxz.OMEGA_BRANCHES, default="signed-cos")
    p.add_argument("--skip-renormalized", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("limit", help="thermodynamic limit of the fidelity")
    _add_point_args(p, delta=False, size=False)
    p.add_argument("--tolerance", type=float, help="window around g = 1 instead of equality")
    _add_output_args(p)
    p.set_defaults(func=cmd_limit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, FitError) as exc:
        kind = "regime" if isinstance(exc, RegimeNotSpannedError) else "domain"
        sys.stderr.write(f"{kind} error: {exc}\n")
        return EXIT_DOMAIN
    except QrgError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
