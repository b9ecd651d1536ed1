"""Command-line front end: ``qbil list | eval | check | sweep``.

Exit codes: 0 pass, 1 infrastructure error, 2 evaluation error,
3 constraint violation, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from typing import Any, Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from qbil.errors import QbilError, SpecError
from qbil.identities import catalog, constraints_check, full_point, get
from qbil.numerics import EXACT, Tower, encode_number, format_value
from qbil.series import EvalOptions, evaluate, spec_from_json
from qbil.verify import (
    CONSTRAINT_VIOLATION,
    DEGENERATE,
    ERROR,
    FAIL,
    PASS,
    certify,
    check_identity,
    check_sample,
    default_workers,
    options_for,
    sweep_many,
)

EXIT_OK = 0
EXIT_INFRA = 1
EXIT_EVAL = 2
EXIT_CONSTRAINT = 3
EXIT_FAIL = 4

CONFIG_ENV = "QBIL_CONFIG"

# keys accepted in the config file, with their types
CONFIG_KEYS: dict[str, type] = {
    "tower": str,
    "prec": int,
    "tol": float,
    "eps": float,
    "max_terms": int,
    "r_max": int,
    "s_max": int,
    "m_max": int,
    "seed": int,
    "n": int,
    "workers": int,
    "format": str,
}

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "n": 30,
    "eps": 1e-30,
    "format": "text",
}

_STATUS_EXIT = {
    PASS: EXIT_OK,
    FAIL: EXIT_FAIL,
    CONSTRAINT_VIOLATION: EXIT_CONSTRAINT,
    DEGENERATE: EXIT_EVAL,
    ERROR: EXIT_EVAL,
}


class CliError(Exception):
    """Bad input or environment; maps to exit code 1."""


# -- config ------------------------------------------------------------

def load_config(path: str | None) -> dict:
    """Read a flat TOML document; unknown keys and wrong types are rejected."""
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"config {path}: {exc}") from None
    out = {}
    for key, value in data.items():
        norm = key.replace("-", "_")
        if norm not in CONFIG_KEYS:
            raise CliError(f"config {path}: unknown key {key!r}")
        want = CONFIG_KEYS[norm]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or isinstance(value, bool):
            raise CliError(f"config {path}: {key} must be {want.__name__}")
        out[norm] = value
    return out


def resolve(args: argparse.Namespace, config: Mapping[str, Any]) -> dict:
    """Flags win over the config file, which wins over built-in defaults."""
    merged = dict(DEFAULTS)
    merged.update(config)
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def tower_from(settings: Mapping[str, Any]) -> Tower | None:
    """Tower requested by flags/config, or None to use each identity's policy."""
    name, prec = settings.get("tower"), settings.get("prec")
    try:
        if name is None:
            return Tower.parse("big", prec) if prec is not None else None
        return Tower.parse(name, prec)
    except (SpecError, ValueError) as exc:
        raise CliError(str(exc)) from None


def limits_from(settings: Mapping[str, Any]) -> dict | None:
    lim = {k: settings[k] for k in ("r_max", "s_max", "m_max") if settings.get(k) is not None}
    return lim or None


# -- parser ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"TOML config file (default: ${CONFIG_ENV})")
    common.add_argument("--tower", help="double, big, big(P) or exact")
    common.add_argument("--prec", type=int, help="decimal digits for the big tower")
    common.add_argument("--tol", type=float, help="relative residual tolerance")
    common.add_argument("--max-terms", dest="max_terms", type=int)
    common.add_argument("--format", choices=("json", "csv", "text"))
    common.add_argument("--out", help="write output to FILE instead of stdout")

    p = argparse.ArgumentParser(prog="qbil", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ls = sub.add_parser("list", parents=[common], help="list the identity catalog")
    ls.add_argument("--json", action="store_true", help="emit catalog metadata as JSON")

    ev = sub.add_parser("eval", parents=[common], help="evaluate a series given as JSON")
    ev.add_argument("spec", help="series spec file ('-' for stdin)")

    ck = sub.add_parser("check", parents=[common], help="check one identity at one point")
    ck.add_argument("--identity", required=True)
    src = ck.add_mutually_exclusive_group(required=True)
    src.add_argument("--point", metavar="FILE", help="JSON point file")
    src.add_argument("--sample", metavar="SEED", type=int, help="use the seeded sample point")
    ck.add_argument("--index", type=int, default=0, help="sample index (with --sample)")
    ck.add_argument("--certify", action="store_true", help="rigorous check at an exact rational point")
    ck.add_argument("--eps", type=float, help="certified bound on |LHS - RHS|")

    sw = sub.add_parser("sweep", parents=[common], help="check seeded random points")
    who = sw.add_mutually_exclusive_group(required=True)
    who.add_argument("--identity", action="append", help="identity id (repeatable)")
    who.add_argument("--all", action="store_true", help="every identity in the catalog")
    sw.add_argument("-n", dest="n", type=int, metavar="POINTS")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--r-max", dest="r_max", type=int)
    sw.add_argument("--s-max", dest="s_max", type=int)
    sw.add_argument("--m-max", dest="m_max", type=int)
    return p


# -- output ------------------------------------------------------------

def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=True) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


CSV_FIELDS = ("identity", "seed", "index", "tower", "status", "rel_residual", "abs_residual",
              "lhs", "rhs", "shape", "point", "message")


def reports_csv(reports: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        row = []
        for key in CSV_FIELDS:
            v = r.get(key)
            if isinstance(v, (dict, list)):
                v = json.dumps(v, separators=(",", ":"))
            row.append("" if v is None else v)
        w.writerow(row)
    return buf.getvalue()


def _fmt_res(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.3e}"
    return str(x)


def report_text(r: Mapping) -> str:
    where = f" seed={r['seed']} index={r['index']}" if r.get("seed") is not None else ""
    line = f"{r['identity']}{where} [{r['tower']}] {r['status']} rel_residual={_fmt_res(r.get('rel_residual'))}"
    if r.get("message"):
        line += f"  ({r['message']})"
    return line


# -- commands ----------------------------------------------------------

def cmd_list(args: argparse.Namespace, settings: Mapping) -> int:
    ids = sorted(catalog(), key=lambda d: d.id)
    if args.json or settings.get("format") == "json":
        emit(dump_json([d.metadata() for d in ids]), settings.get("out"))
        return EXIT_OK
    lines = []
    for d in ids:
        shape = " ".join(f"{k}={lo}..{hi}" for k, (lo, hi) in sorted(d.shape_space.items())) or "-"
        lines.append(f"{d.id}\t{shape}\t{d.constraint_summary()}\t{d.title}")
    emit("\n".join(lines) + "\n", settings.get("out"))
    return EXIT_OK


def _read_json(path: str) -> Any:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def cmd_eval(args: argparse.Namespace, settings: Mapping) -> int:
    tower = tower_from(settings) or Tower.parse("double")
    obj = _read_json(args.spec)
    try:
        spec = spec_from_json(obj, tower)
    except SpecError as exc:
        raise CliError(f"{args.spec}: {exc}") from None
    tol = tower.default_tolerance()
    if settings.get("tol") is not None and not tower.is_exact:
        tol = tol.with_residual(settings["tol"])
    kw = {"max_terms": settings["max_terms"]} if settings.get("max_terms") else {}
    opts = EvalOptions(tower, tol, **kw)
    try:
        with tower.context():
            res = evaluate(spec, opts)
    except QbilError as exc:
        sys.stderr.write(f"{exc.kind}: {exc}\n")
        return EXIT_EVAL
    fmt = settings.get("format")
    if fmt == "json":
        with tower.context():
            text = format_value(res.value, tower.prec if tower.is_big else 17)
        body = {"value": encode_number(res.value), "text": text, "tower": tower.label, **res.diagnostics()}
        emit(dump_json(body), settings.get("out"))
    else:
        with tower.context():
            text = format_value(res.value, max(17, tower.prec) if tower.is_big else 17)
        extra = f"terms={res.terms}" + (f" backward_terms={res.backward_terms}" if res.backward_terms else "")
        if res.terminated:
            extra += " terminated"
        emit(f"{text}\n# {tower.label} {extra}\n", settings.get("out"))
    return EXIT_OK


def _point_file(path: str) -> tuple[dict, dict | None]:
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise CliError(f"{path}: point must be a JSON object")
    if "params" in obj:
        params, shape = obj["params"], obj.get("shape")
    else:
        params = {k: v for k, v in obj.items() if k != "shape"}
        shape = obj.get("shape")
    if not isinstance(params, dict) or (shape is not None and not isinstance(shape, dict)):
        raise CliError(f"{path}: 'params' and 'shape' must be objects")
    return params, shape


def _identity(name: str) -> Any:
    try:
        return get(name)
    except KeyError as exc:
        raise CliError(exc.args[0]) from None


def cmd_check(args: argparse.Namespace, settings: Mapping) -> int:
    d = _identity(args.identity)
    if args.certify:
        return _certify(args, settings, d)
    tower = tower_from(settings)
    opts = options_for(d.id, tower, settings.get("tol"), settings.get("max_terms"))
    if args.sample is not None:
        rep = check_sample(d.id, args.sample, args.index, opts, limits_from(settings))
    else:
        params, shape = _point_file(args.point)
        try:
            pt = full_point(d, params, shape, opts.tower)
        except QbilError as exc:
            sys.stderr.write(f"{exc.kind}: {exc}\n")
            return EXIT_EVAL
        rep = check_identity(d, pt, opts)
    out = rep.to_json()
    fmt = settings.get("format")
    if fmt == "json":
        emit(dump_json(out), settings.get("out"))
    elif fmt == "csv":
        emit(reports_csv([out]), settings.get("out"))
    else:
        lines = [report_text(out)]
        if rep.lhs is not None:
            lines.append(f"  lhs = {format_value(rep.lhs)}")
            lines.append(f"  rhs = {format_value(rep.rhs)}")
        emit("\n".join(lines) + "\n", settings.get("out"))
    return _STATUS_EXIT.get(rep.status, EXIT_EVAL)


def _certify(args: argparse.Namespace, settings: Mapping, d: Any) -> int:
    if args.point is None:
        raise CliError("--certify needs --point with exact rational values")
    params, shape = _point_file(args.point)
    eps = Fraction(settings["eps"])
    try:
        pt = full_point(d, params, shape, EXACT)
        cons = constraints_check(d, pt, EXACT)
        if not cons.ok:
            msg = "; ".join(i["constraint"] for i in cons.failed())
            emit(f"{d.id} {CONSTRAINT_VIOLATION} ({msg})\n", settings.get("out"))
            return EXIT_CONSTRAINT
        cert = certify(d.id, params, eps, shape)
    except QbilError as exc:
        sys.stderr.write(f"{exc.kind}: {exc}\n")
        return EXIT_EVAL
    body = cert.to_json()
    if settings.get("format") == "json":
        emit(dump_json(body), settings.get("out"))
    else:
        word = "certified" if cert.certified else ("refuted" if cert.refuted else "inconclusive")
        emit(f"{d.id} {cert.status} {word}: |LHS - RHS| <= {float(cert.gap_bound):.3e} "
             f"(eps {float(eps):.1e})\n", settings.get("out"))
    return _STATUS_EXIT[cert.status]


def cmd_sweep(args: argparse.Namespace, settings: Mapping) -> int:
    if args.all:
        ids = sorted(d.id for d in catalog())
    else:
        ids = [_identity(i).id for i in args.identity]
    n = settings["n"]
    if n < 1:
        raise CliError("-n must be at least 1")
    workers = settings.get("workers") or default_workers()
    reports, summaries = sweep_many(ids, n, settings["seed"], tower_from(settings), settings.get("tol"),
                                    workers, settings.get("max_terms"), limits_from(settings))
    fmt = settings.get("format")
    if fmt == "json":
        text = dump_json({"reports": reports, "summary": [s.to_json() for s in summaries]})
    elif fmt == "csv":
        text = reports_csv(reports)
    else:
        lines = [report_text(r) for r in reports if r["status"] != PASS]
        for s in summaries:
            lines.append(f"{s.identity}: {s.passed}/{s.n_points} pass, {s.failed} fail, {s.skipped} skip, "
                         f"max residual {s.max_residual:.3e}")
        text = "\n".join(lines) + "\n"
    emit(text, settings.get("out"))
    return EXIT_FAIL if any(s.failed for s in summaries) else EXIT_OK


COMMANDS = {"list": cmd_list, "eval": cmd_eval, "check": cmd_check, "sweep": cmd_sweep}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config or os.environ.get(CONFIG_ENV))
        settings = resolve(args, config)
        settings["out"] = args.out
        if args.command == "sweep" and settings.get("format") == "text" and args.out and \
                args.format is None and "format" not in config:
            settings["format"] = "json"  # a report file defaults to the machine format
        return COMMANDS[args.command](args, settings)
    except CliError as exc:
        sys.stderr.write(f"qbil: {exc}\n")
        return EXIT_INFRA
    except QbilError as exc:
        sys.stderr.write(f"qbil: {exc.kind}: {exc}\n")
        return EXIT_EVAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
