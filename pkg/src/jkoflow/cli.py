"""Command-line experiment runner.

Every subcommand writes CSV output plus ``manifest.json`` into ``--out``.
Settings come from ``--config`` (flat ``key = value`` lines, keys named
like the long flags with ``-`` or ``_``) and are overridden by flags.

Exit codes: 0 success, 1 usage or configuration error, 2 a check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .errors import JKOError
from .flow import (
    discrete_flow,
    exponential_formula_experiment,
    varying_flow,
)
from .functionals import parse_functional
from .geometry import (
    based_plan,
    check_hilbertian_identity,
    check_transport_geodesic_identity,
    four_point_glue,
    generalized_geodesic,
    pseudo_metric_squared,
)
from .measures import load_measure, make_measure, measure_to_csv, random_measure
from .proximal import proximal_step
from .transport import wasserstein_squared
from .verify import parse_kinds, sweep

IDENTITY_TOL = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this contract reserves 2 for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- value parsers ---------------------------------------------------------


def _points(text: str):
    """``"1;2"`` is two atoms on the line, ``"0,0;1,10"`` two atoms in the plane."""
    try:
        rows = [[float(v) for v in atom.split(",")] for atom in text.split(";") if atom.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad point list {text!r}") from exc
    return rows


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _seed_list(text: str) -> list:
    """``1..1000`` (inclusive) or a comma list."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return _int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}") from exc


def _sizes(text: str) -> list:
    """``"2:1,4:3"`` means (N=2, d=1) and (N=4, d=3)."""
    try:
        return [tuple(int(v) for v in p.split(":")) for p in str(text).split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {v}")
    return v


def _pos_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


# -- parser ----------------------------------------------------------------

# (flag, type, default, help); defaults live here so a config file can fill gaps
_MEASURE_OPTS = [
    ("points", _points, None, "inline atoms, e.g. '1;2' or '0,0;1,10'"),
    ("measure", str, None, "measure CSV file (header 'dim,n')"),
    ("seed", int, 0, "seed for a random measure when no atoms are given"),
    ("n-atoms", int, 4, "atoms in the random measure"),
    ("dim", int, 2, "dimension of the random measure"),
]

_OPTS = {
    "flow": [
        ("functional", str, "potential:quadratic", "energy spec, e.g. potential:cosine or sum:[...]"),
        ("tau", _pos_float, 0.25, "fixed step size"),
        ("n", _nonneg_int, 4, "number of fixed steps"),
        ("schedule", _float_list, None, "comma list of varying steps (overrides tau/n)"),
    ]
    + _MEASURE_OPTS,
    "expformula": [
        ("functional", str, "potential:quadratic", "energy spec"),
        ("t", _pos_float, 1.0, "final time"),
        ("n", _int_list, [4, 16, 64, 256], "comma list of step counts"),
    ]
    + [("points", _points, [[1.0]], "inline atoms (default: one atom at 1)")]
    + _MEASURE_OPTS[1:],
    "verify": [
        ("kinds", str, "all", "comma list of inequality kinds, or 'all'"),
        ("seeds", _seed_list, list(range(1, 101)), "seed range 'a..b' or comma list"),
        ("sizes", _sizes, None, "comma list of N:d pairs (default: derived per seed)"),
    ],
    "prox": [
        ("functional", str, "potential:quadratic", "energy spec"),
        ("tau", _pos_float, 0.5, "step size"),
    ]
    + _MEASURE_OPTS,
    "geodesic": [
        ("omega", _points, None, "base measure atoms"),
        ("mu0", _points, None, "first endpoint atoms"),
        ("mu1", _points, None, "second endpoint atoms"),
        ("nu", _points, None, "extra measure for the transport identities (default: mu0)"),
        ("alpha", float, 0.5, "interpolation parameter in [0, 1]"),
    ],
}


def _dest(flag: str) -> str:
    return flag.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jkoflow", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"jkoflow {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in _OPTS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--out", help="output directory (default: out)")
        for flag, typ, default, text in opts:
            sp.add_argument(f"--{flag}", type=typ, default=None, help=f"{text} [default: {default}]")
    rp = sub.add_parser("replay", help="re-run a saved manifest and compare output hashes")
    rp.add_argument("manifest", help="path to manifest.json")
    rp.add_argument("--out", help="output directory (default: <manifest dir>/replay)")
    return p


def read_config(path) -> dict:
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{num}: expected 'key = value'")
        out[_dest(key.strip())] = value.strip()
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags into a JSON-friendly dict."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    known = {_dest(f) for f, *_ in _OPTS[command]} | {"out"}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for flag, typ, default, _ in _OPTS[command]:
        key = _dest(flag)
        value = getattr(args, key)
        if value is None and key in cfg:
            try:
                value = typ(cfg[key])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key}: {exc}") from exc
        resolved[key] = default if value is None else value
    resolved["out"] = args.out or cfg.get("out") or "out"
    return resolved


# -- commands ----------------------------------------------------------------


def _measure(cfg: dict):
    if cfg.get("points") is not None:
        return make_measure(cfg["points"])
    if cfg.get("measure"):
        return load_measure(cfg["measure"])
    return random_measure(cfg["seed"], cfg["n_atoms"], cfg["dim"])


def _run_flow(cfg, out: Path):
    E = parse_functional(cfg["functional"])
    mu0 = _measure(cfg)
    if cfg["schedule"] is not None:
        trace = varying_flow(E, cfg["schedule"], mu0)
    else:
        trace = discrete_flow(E, cfg["tau"], cfg["n"], mu0)
    files = {"trace.csv": trace.to_csv(), "final.csv": measure_to_csv(trace.final)}
    worst_el = max(s.el_residual for s in trace.steps)
    return files, {"passed": len(trace.steps) - 1, "failed": 0, "max_el_residual": worst_el}


def _run_expformula(cfg, out: Path):
    table = exponential_formula_experiment(cfg["functional"], _measure(cfg), cfg["t"], cfg["n"])
    passed = sum(r.passed for r in table.rows)
    return {"expformula.csv": table.to_csv()}, {"passed": passed, "failed": len(table.rows) - passed}


def _run_verify(cfg, out: Path):
    summary = sweep(parse_kinds(cfg["kinds"]), cfg["seeds"], cfg["sizes"])
    info = summary.to_json()
    files = {"sweep.csv": summary.to_csv(), "summary.json": json.dumps(info, indent=2, sort_keys=True) + "\n"}
    failed = summary.failures + sum(c["errors"] for c in summary.counts.values())
    return files, {"passed": sum(c["passed"] for c in summary.counts.values()), "failed": failed}


def _run_prox(cfg, out: Path):
    mu = _measure(cfg)
    res = proximal_step(cfg["functional"], cfg["tau"], mu)
    report = json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n"
    return {"prox.json": report, "result.csv": measure_to_csv(res.nu)}, {"passed": 1, "failed": 0}


def _run_geodesic(cfg, out: Path):
    if cfg["omega"] is None or cfg["mu0"] is None or cfg["mu1"] is None:
        raise UsageError("geodesic needs --omega, --mu0 and --mu1")
    omega, mu0, mu1 = (make_measure(cfg[k]) for k in ("omega", "mu0", "mu1"))
    nu = make_measure(cfg["nu"]) if cfg["nu"] is not None else mu0
    alpha = cfg["alpha"]
    plan = based_plan(omega, mu0, mu1)
    hil = check_hilbertian_identity(plan, alpha)
    residuals = {
        "hilbertian": hil.residual,
        "transport_geodesic": check_transport_geodesic_identity(omega, nu, mu0, mu1, alpha),
        "four_point_glue": four_point_glue(omega, mu0, mu1, nu, alpha).residual,
    }
    report = {
        "alpha": alpha,
        "plan": plan.to_dict(),
        "pseudo_metric_squared": pseudo_metric_squared(plan),
        "w2_squared": wasserstein_squared(mu0, mu1),
        "pairing_cost": hil.pairing_cost,
        "w2_squared_base_to_interpolant": hil.w2_squared,
        "residuals": residuals,
    }
    passed = sum(r <= IDENTITY_TOL for r in residuals.values())
    files = {
        "geodesic.csv": measure_to_csv(generalized_geodesic(plan, alpha).measure),
        "identities.json": json.dumps(report, indent=2, sort_keys=True) + "\n",
    }
    return files, {"passed": passed, "failed": len(residuals) - passed}


_RUNNERS = {
    "flow": _run_flow,
    "expformula": _run_expformula,
    "verify": _run_verify,
    "prox": _run_prox,
    "geodesic": _run_geodesic,
}


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def execute(command: str, cfg: dict) -> int:
    out = Path(cfg["out"])
    start = time.perf_counter()
    files, counts = _RUNNERS[command](cfg, out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config": cfg,
        "seeds": cfg.get("seeds", [cfg["seed"]] if "seed" in cfg else []),
        "timing_seconds": time.perf_counter() - start,
        "counts": counts,
        "outputs": {name: _sha256(text) for name, text in sorted(files.items())},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{command}: {counts['passed']} passed, {counts['failed']} failed -> {out}")
    return 0 if counts["failed"] == 0 else 2


def replay(path: str, out: str | None) -> int:
    manifest = json.loads(Path(path).read_text())
    cfg = dict(manifest["config"])
    cfg["out"] = out or str(Path(path).parent / "replay")
    if _normalize(cfg["out"]) == _normalize(manifest["config"]["out"]):
        raise UsageError("replay output directory must differ from the original run")
    code = execute(manifest["command"], cfg)
    fresh = json.loads((Path(cfg["out"]) / "manifest.json").read_text())["outputs"]
    mismatched = [name for name, digest in manifest["outputs"].items() if fresh.get(name) != digest]
    if mismatched:
        print(f"replay: output differs from manifest: {', '.join(mismatched)}", file=sys.stderr)
        return 2
    print(f"replay: {len(fresh)} outputs hash-identical")
    return code


def _normalize(p: str) -> str:
    return str(Path(p).resolve())


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        if args.command == "replay":
            return replay(args.manifest, args.out)
        cfg = resolve(args.command, args)
        return execute(args.command, cfg)
    except UsageError as exc:
        print(f"jkoflow: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        # JKOError subclasses that are ValueErrors land here too: bad input
        print(f"jkoflow: error: {exc}", file=sys.stderr)
        return 1
    except JKOError as exc:
        print(f"jkoflow: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
