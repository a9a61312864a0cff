"""Command-line entry point: seeded experiments with reproducible outputs.

Subcommands: ``analytic`` (closed forms), ``escape`` (half-line ruin MC),
``excursion`` (block excursion MC), ``branching`` (survival estimate),
``probe`` (root-return escape probe), ``sweep`` (reinforcement sweep).
Every data file gets a sibling ``<name>.manifest.json`` recording the fully
resolved configuration; re-running a manifest's config reproduces the data
file byte-for-byte.  Exit codes: 0 success, 2 configuration error, 3 domain
error, 4 unwritable output path.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__, analytic, branching, experiments
from .errors import DomainError
from .experiments import EstimateRecord, RunConfig
from .tree import parse_model

FIXED_COLUMNS = ("estimate", "stderr", "n", "reference", "z")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_results(records: list[EstimateRecord], fmt: str, path: str) -> None:
    """Write records as CSV (documented column order) or JSONL (same fields)."""
    if fmt not in ("csv", "jsonl"):
        raise DomainError(f"unknown format {fmt!r}")
    rows = [r.csv_row() for r in records]
    param_names: list[str] = []
    for row in rows:
        for key in row:
            if key not in ("experiment", *FIXED_COLUMNS) and key not in param_names:
                param_names.append(key)
    header = ["experiment", *param_names, *FIXED_COLUMNS]
    lines = []
    if fmt == "csv":
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_fmt(row.get(c)) for c in header))
    else:
        for row in rows:
            obj = {}
            for c in header:
                v = row.get(c)
                if isinstance(v, float):
                    v = float(f"{v:.17g}")
                obj[c] = v
            lines.append(json.dumps(obj))
    Path(path).write_text("\n".join(lines) + "\n")


def _manifest_path(out: str) -> Path:
    return Path(out).with_suffix(".manifest.json")


def _write_manifest(config: RunConfig, records: list[EstimateRecord], started: float):
    payload = {
        "artifact_version": __version__,
        "config": config.as_dict(),
        "seed": config.seed,
        "duration_seconds": time.time() - started,
        "results": [asdict(r) for r in records],
    }
    _manifest_path(config.out).write_text(json.dumps(payload, indent=2, default=float) + "\n")


def _emit(config: RunConfig, records: list[EstimateRecord], started: float) -> None:
    for r in records:
        ref = "" if r.reference is None else f" reference={_fmt(r.reference)} z={_fmt(r.z)}"
        print(
            f"{r.experiment}: estimate={_fmt(r.estimate)} stderr={_fmt(r.stderr)}"
            f" n={r.n}{ref}"
        )
    if config.out:
        try:
            write_results(records, config.format, config.out)
            _write_manifest(config, records, started)
        except OSError as exc:
            print(f"cannot write {config.out}: {exc}", file=sys.stderr)
            raise SystemExit(4)


def _load_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"cannot read config {path}: {exc}", file=sys.stderr)
        raise SystemExit(2)
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            print(f"{path}:{ln}: expected key=value", file=sys.stderr)
            raise SystemExit(2)
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(args: argparse.Namespace, spec: dict[str, type]) -> dict:
    """Merge CLI values over config-file values; cast and require."""
    file_vals = _load_config_file(args.config) if getattr(args, "config", None) else {}
    out = {}
    for name, (caster, required, default) in spec.items():
        val = getattr(args, name, None)
        if val is None and name in file_vals:
            try:
                val = caster(file_vals[name])
            except ValueError:
                print(f"config value {name}={file_vals[name]!r} is invalid", file=sys.stderr)
                raise SystemExit(2)
        if val is None:
            val = default
        if val is None and required:
            print(f"missing required option --{name.replace('_', '-')}", file=sys.stderr)
            raise SystemExit(2)
        out[name] = val
    return out


def _common_output_opts(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="master seed (required)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--out", default=None, help="data file path (manifest written beside)")
    p.add_argument("--config", default=None, help="key=value defaults file")


def _parse_a_grid(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orrw", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form quantities")
    p.add_argument("--what", required=True,
                   choices=("critical", "resistance", "product", "bound", "n0", "delta", "levels"))
    p.add_argument("--model", default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--kmax", type=int, default=64)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--terms", type=int, default=64)
    p.add_argument("--config", default=None)

    p = sub.add_parser("escape", help="half-line escape Monte Carlo")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None)
    _common_output_opts(p)

    p = sub.add_parser("excursion", help="block excursion Monte Carlo")
    p.add_argument("--model", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None)
    _common_output_opts(p)

    p = sub.add_parser("branching", help="branching survival estimate")
    p.add_argument("--model", default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--k0", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--law", choices=("sampler", "empirical"), default=None)
    p.add_argument("--cap", type=int, default=None)
    _common_output_opts(p)

    p = sub.add_parser("probe", help="root-return escape probe")
    p.add_argument("--model", default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    _common_output_opts(p)

    p = sub.add_parser("sweep", help="reinforcement-parameter sweep")
    p.add_argument("--model", default=None)
    p.add_argument("--a-grid", dest="a_grid", default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    _common_output_opts(p)

    return ap


def _sparse_d(model_text: str) -> int:
    model = parse_model(model_text)
    if model.kind == "weighted":
        raise DomainError("this experiment runs on sparse trees (use sparse:<d>)")
    return 1 if model.kind == "halfline" else model.d


def _cmd_analytic(args) -> int:
    vals = _resolve(
        args,
        {
            "model": (str, False, None),
            "a": (float, False, None),
            "m": (int, False, None),
            "M": (int, False, None),
            "k": (int, False, None),
            "n": (int, False, None),
            "n0": (int, False, None),
            "kmax": (int, False, 64),
            "count": (int, False, 8),
            "terms": (int, False, 64),
        },
    )

    def need(*names):
        missing = [n for n in names if vals.get(n) is None]
        if missing:
            print(f"--what {args.what} needs --" + " --".join(missing), file=sys.stderr)
            raise SystemExit(2)

    what = args.what
    if what == "critical":
        need("model")
        print(f"critical_parameter = {_fmt(analytic.critical_parameter(parse_model(vals['model'])))}")
    elif what == "resistance":
        need("model")
        res = analytic.effective_resistance(parse_model(vals["model"]), vals["terms"])
        limit = "" if res.limit is None else f" limit = {_fmt(res.limit)}"
        print(
            f"resistance partial_sum({res.terms} terms) = {_fmt(res.partial_sum)}"
            f" classification = {res.classification}{limit}"
        )
    elif what == "product":
        need("m", "M", "a")
        val = analytic.escape_product(vals["m"], vals["M"], vals["a"])
        print(f"escape_product({vals['m']}, {vals['M']}, {_fmt(vals['a'])}) = {_fmt(val)}")
    elif what == "bound":
        need("model", "a", "k", "n")
        d = _sparse_d(vals["model"])
        val = analytic.escape_bound(vals["k"], vals["n"], vals["a"], d)
        print(f"escape_bound(k={vals['k']}, n={vals['n']}, a={_fmt(vals['a'])}, d={d}) = {_fmt(val)}")
    elif what == "n0":
        need("model", "a")
        d = _sparse_d(vals["model"])
        n0 = analytic.find_n0(vals["a"], d, vals["kmax"])
        prof = analytic.n0_condition_profile(vals["a"], d, n0, vals["kmax"])
        print(f"n0 = {n0}")
        print(f"delta = {_fmt(analytic.delta(d, n0))}")
        print(f"worst checked k = {prof['worst_k']}")
    elif what == "delta":
        need("model", "n0")
        d = _sparse_d(vals["model"])
        print(f"delta = {_fmt(analytic.delta(d, vals['n0']))}")
    elif what == "levels":
        need("model", "a")
        d = _sparse_d(vals["model"])
        seq = analytic.recurrence_level_sequence(vals["a"], d, vals["count"])
        print("levels = " + ", ".join(str(v) for v in seq))
    return 0


_COMMON_SPEC = {
    "seed": (int, True, None),
    "threads": (int, False, 1),
    "format": (str, False, "csv"),
    "out": (str, False, None),
}


def _cmd_escape(args) -> int:
    vals = _resolve(
        args,
        {
            "m": (int, True, None),
            "M": (int, True, None),
            "a": (float, True, None),
            "replicas": (int, True, None),
            **_COMMON_SPEC,
        },
    )
    started = time.time()
    rec = experiments.halfline_escape(
        vals["m"], vals["M"], vals["a"], vals["replicas"], vals["seed"], vals["threads"]
    )
    config = RunConfig(
        "escape",
        vals["seed"],
        vals["replicas"],
        "halfline",
        {"m": vals["m"], "M": vals["M"], "a": vals["a"]},
        None,
        vals["threads"],
        vals["out"],
        vals["format"],
    )
    _emit(config, [rec], started)
    return 0


def _cmd_excursion(args) -> int:
    vals = _resolve(
        args,
        {
            "model": (str, True, None),
            "k": (int, True, None),
            "n0": (int, True, None),
            "a": (float, True, None),
            "replicas": (int, True, None),
            **_COMMON_SPEC,
        },
    )
    d = _sparse_d(vals["model"])
    started = time.time()
    records, _ = experiments.excursion_stats(
        d, vals["k"], vals["n0"], vals["a"], vals["replicas"], vals["seed"], vals["threads"]
    )
    config = RunConfig(
        "excursion",
        vals["seed"],
        vals["replicas"],
        vals["model"],
        {"k": vals["k"], "n0": vals["n0"], "a": vals["a"]},
        None,
        vals["threads"],
        vals["out"],
        vals["format"],
    )
    _emit(config, records, started)
    return 0


def _cmd_branching(args) -> int:
    vals = _resolve(
        args,
        {
            "model": (str, True, None),
            "a": (float, True, None),
            "n0": (int, True, None),
            "k0": (int, False, 1),
            "generations": (int, False, 20),
            "replicas": (int, True, None),
            "law": (str, False, "sampler"),
            "cap": (int, False, 100_000),
            **_COMMON_SPEC,
        },
    )
    d = _sparse_d(vals["model"])
    started = time.time()
    summary = branching.survival_estimate(
        vals["k0"],
        vals["n0"],
        vals["a"],
        d,
        vals["generations"],
        vals["replicas"],
        vals["seed"],
        vals["law"],
        vals["cap"],
    )
    records = [summary.record]
    if summary.moment_bound is not None:
        print(f"moment lower bound (empirical) = {_fmt(summary.moment_bound)}")
    print(f"delta = {_fmt(summary.delta)}")
    config = RunConfig(
        "branching",
        vals["seed"],
        vals["replicas"],
        vals["model"],
        {
            "a": vals["a"],
            "n0": vals["n0"],
            "k0": vals["k0"],
            "generations": vals["generations"],
            "law": vals["law"],
            "cap": vals["cap"],
        },
        None,
        vals["threads"],
        vals["out"],
        vals["format"],
    )
    _emit(config, records, started)
    return 0


def _cmd_probe(args) -> int:
    vals = _resolve(
        args,
        {
            "model": (str, True, None),
            "a": (float, True, None),
            "k": (int, True, None),
            "n": (int, True, None),
            "replicas": (int, True, None),
            "budget": (int, False, 10_000_000),
            **_COMMON_SPEC,
        },
    )
    d = _sparse_d(vals["model"])
    started = time.time()
    rec = experiments.root_return_probe(
        d,
        vals["a"],
        vals["k"],
        vals["n"],
        vals["replicas"],
        vals["budget"],
        vals["seed"],
        vals["threads"],
    )
    config = RunConfig(
        "probe",
        vals["seed"],
        vals["replicas"],
        vals["model"],
        {"a": vals["a"], "k": vals["k"], "n": vals["n"]},
        vals["budget"],
        vals["threads"],
        vals["out"],
        vals["format"],
    )
    _emit(config, [rec], started)
    return 0


def _cmd_sweep(args) -> int:
    vals = _resolve(
        args,
        {
            "model": (str, True, None),
            "a_grid": (_parse_a_grid, True, None),
            "budget": (int, True, None),
            "replicas": (int, True, None),
            **_COMMON_SPEC,
        },
    )
    grid = vals["a_grid"]
    if isinstance(grid, str):
        grid = _parse_a_grid(grid)
    d = _sparse_d(vals["model"])
    started = time.time()
    records = experiments.phase_sweep(
        d, grid, vals["budget"], vals["replicas"], vals["seed"], vals["threads"]
    )
    config = RunConfig(
        "sweep",
        vals["seed"],
        vals["replicas"],
        vals["model"],
        {"a_grid": grid},
        vals["budget"],
        vals["threads"],
        vals["out"],
        vals["format"],
    )
    _emit(config, records, started)
    return 0


_COMMANDS = {
    "analytic": _cmd_analytic,
    "escape": _cmd_escape,
    "excursion": _cmd_excursion,
    "branching": _cmd_branching,
    "probe": _cmd_probe,
    "sweep": _cmd_sweep,
}


def dispatch(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:
        return int(exc.code or 0)


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
