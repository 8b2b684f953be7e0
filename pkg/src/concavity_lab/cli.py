"""Command line entry point: ``concavity-lab <command> ...``.

Commands::

    solve <cfg.json>                       solve one Dirichlet problem
    transform <field.csv> <transform.json> write phi(u) as a field CSV
    concavity <field.csv> <transform.json> defect report of phi(u)
    experiment <name|all>                  run named experiments, write reports
    report <dir>                           summarize report.json files under dir

Exit status is 0 when every verdict passes, 1 when any fails and 2 for
configuration or runtime errors.  Outputs go under ``$CONCAVITY_LAB_OUT``
(default ``./out``).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

COMMANDS = ("solve", "transform", "concavity", "experiment", "report")

SOURCE_KEYS = {
    "power": {"type", "q", "a"},
    "torsion": {"type", "a"},
    "sum_powers": {"type", "q", "r", "a"},
    "singular": {"type", "q", "eta", "a"},
    "eigen": {"type", "a"},
    "ground_state": {"type", "q"},
}
SOLVE_KEYS = {"name", "p", "source", "domain", "h", "tol", "max_iters", "seed",
              "transform", "stride"}
SOLVE_REQUIRED = ("p", "source", "domain", "h")


class ConfigError(ValueError):
    """Invalid or unreadable configuration; maps to exit status 2."""


@dataclass
class RunConfig:
    command: str
    paths: list = field(default_factory=list)
    overrides: dict = field(default_factory=dict)
    solve: dict | None = None

    @property
    def reference_mode(self) -> bool:
        return bool(self.overrides.get("reference_mode", False))

    @property
    def workers(self) -> int:
        if self.reference_mode:
            return 1
        return int(self.overrides.get("threads") or 1)


def output_root() -> Path:
    return Path(os.environ.get("CONCAVITY_LAB_OUT", "out"))


# --------------------------------------------------------------------------
# config parsing

def _load_json(path) -> object:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such file")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number(cfg: dict, key: str, path: str, positive=False, integer=False):
    v = cfg[key]
    if not _is_number(v) or (integer and int(v) != v):
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"{path}{key}: expected {kind}, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}{key}: must be positive")
    return v


def _check_weight(lit, path: str):
    if _is_number(lit):
        if not lit > 0:
            raise ConfigError(f"{path}: weight must be positive")
        return
    allowed = {"const", "affine", "sin", "hardy_henon"}
    if not isinstance(lit, dict) or len(lit) != 1:
        raise ConfigError(f"{path}: expected a number or a one-key weight object")
    (k, _), = lit.items()
    if k not in allowed:
        raise ConfigError(f"unknown key {path}.{k}")


def validate_solve_config(cfg) -> dict:
    """Schema check of a solve config; raises ConfigError naming the key path."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for k in sorted(cfg):
        if k not in SOLVE_KEYS:
            raise ConfigError(f"unknown key {k!r}")
    for k in SOLVE_REQUIRED:
        if k not in cfg:
            raise ConfigError(f"missing key {k!r}")
    _number(cfg, "p", "", positive=True)
    _number(cfg, "h", "", positive=True)
    for k in ("tol",):
        if k in cfg:
            _number(cfg, k, "", positive=True)
    for k in ("max_iters", "stride"):
        if k in cfg:
            _number(cfg, k, "", positive=True, integer=True)
    if "seed" in cfg:
        _number(cfg, "seed", "", integer=True)
    src = cfg["source"]
    if not isinstance(src, dict):
        raise ConfigError("source: expected an object")
    kind = src.get("type")
    if kind not in SOURCE_KEYS:
        raise ConfigError(f"source.type: unknown source type {kind!r}")
    for k in sorted(src):
        if k not in SOURCE_KEYS[kind]:
            raise ConfigError(f"unknown key source.{k}")
    for k in sorted(SOURCE_KEYS[kind] - {"type", "a"}):
        if k not in src:
            raise ConfigError(f"missing key source.{k}")
        _number(src, k, "source.")
    if "a" in src:
        _check_weight(src["a"], "source.a")
    if "transform" in cfg:
        from .transforms import TransformError, transform_from_literal
        try:
            transform_from_literal(cfg["transform"])
        except (TransformError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"transform: {exc}") from exc

    from .geometry import GeometryError, domain_from_literal
    try:
        domain = domain_from_literal(cfg["domain"])
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from exc
    r = domain.inradius
    if not cfg["h"] < r / 4:
        raise ConfigError(f"h: {cfg['h']} must be below inradius/4 = {r / 4:.6g}")
    return cfg


def parse_config(path, command: str = "solve", overrides: dict | None = None) -> RunConfig:
    """Read and validate a solve config, with flag overrides applied first."""
    cfg = _load_json(path)
    if isinstance(cfg, dict):
        for k in ("h", "tol", "seed", "stride"):
            if overrides and overrides.get(k) is not None:
                cfg[k] = overrides[k]
    validate_solve_config(cfg)
    return RunConfig(command, [str(path)], dict(overrides or {}), cfg)


# --------------------------------------------------------------------------
# report emission

def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def write_csv(path: Path, rows: list, columns: list | None = None) -> None:
    if columns is None:
        columns = []
        for row in rows:
            columns += [k for k in row if k not in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


SUMMARY_COLUMNS = ["experiment", "name", "sup_defect", "bound", "tau", "verdict"]


def _summary_rows(report: dict) -> list:
    return [{"experiment": report["name"], "name": c["name"], "sup_defect": c["sup_defect"],
             "bound": c["bound"], "tau": c["tau"], "verdict": "pass" if c["passed"] else "fail"}
            for c in report.get("cases", [])]


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def emit_report(results, root) -> list:
    """Write report.json, summary.csv and sweep CSVs under ``root/<name>/``.

    Also writes an index ``root/report.json`` and ``root/summary.csv`` over all
    results (empty files with headers when there are none).  Returns the
    written paths.
    """
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"{root}: cannot create output directory ({exc})") from exc
    written, rows, index = [], [], []
    for res in results:
        rep = res.to_dict()
        d = root / rep["name"]
        d.mkdir(parents=True, exist_ok=True)
        _dump(rep, d / "report.json")
        summary = _summary_rows(rep)
        write_csv(d / "summary.csv", summary, SUMMARY_COLUMNS)
        written += [d / "report.json", d / "summary.csv"]
        for key, sweep in sorted(rep.get("sweeps", {}).items()):
            if isinstance(sweep, list) and sweep and all(isinstance(r, dict) for r in sweep):
                write_csv(d / f"{key}.csv", sweep)
                written.append(d / f"{key}.csv")
        rows += summary
        index.append({"name": rep["name"], "passed": rep["passed"], "error": rep["error"]})
    _dump({"experiments": index, "passed": all(e["passed"] for e in index)}, root / "report.json")
    write_csv(root / "summary.csv", rows, SUMMARY_COLUMNS)
    return written + [root / "report.json", root / "summary.csv"]


# --------------------------------------------------------------------------
# commands

def _field_and_transform(field_path, transform_path):
    from .discretization import GridError, read_field_csv
    from .transforms import TransformError, transform_from_literal

    if not Path(field_path).is_file():
        raise ConfigError(f"{field_path}: no such file")
    try:
        u = read_field_csv(field_path)
    except (GridError, KeyError, ValueError) as exc:
        raise ConfigError(f"{field_path}: {exc}") from exc
    lit = _load_json(transform_path)
    try:
        tr = transform_from_literal(lit)
    except (TransformError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{transform_path}: {exc}") from exc
    return u, tr


def cmd_solve(rc: RunConfig) -> int:
    from .concavity import concavity_defect
    from .discretization import write_field_csv
    from .geometry import domain_from_literal
    from .solver import ProblemSpec, solve, source_from_literal
    from .transforms import apply, transform_from_literal

    cfg = rc.solve
    extra = {k: cfg[k] for k in ("tol", "max_iters", "seed") if k in cfg}
    spec = ProblemSpec(float(cfg["p"]), source_from_literal(cfg["source"]),
                       domain_from_literal(cfg["domain"]), float(cfg["h"]), **extra)
    res = solve(spec)
    name = cfg.get("name") or Path(rc.paths[0]).stem
    d = output_root() / "solve" / name
    d.mkdir(parents=True, exist_ok=True)
    write_field_csv(res.u, d / "u.csv")
    summary = res.summary()
    status = EXIT_PASS
    if "transform" in cfg:
        rep = concavity_defect(apply(transform_from_literal(cfg["transform"]), res.u),
                               stride=cfg.get("stride"))
        summary["concavity"] = rep.to_dict()
        status = EXIT_PASS if rep.passes else EXIT_FAIL
    from .experiments.core import clean
    _dump(clean(summary), d / "solve.json")
    print(json.dumps(clean(summary), sort_keys=True))
    return status


def cmd_transform(rc: RunConfig) -> int:
    from .discretization import write_field_csv
    from .transforms import apply

    u, tr = _field_and_transform(*rc.paths[:2])
    out = rc.overrides.get("output")
    if out is None:
        out = output_root() / "transform" / (Path(rc.paths[0]).stem + "_transformed.csv")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_field_csv(apply(tr, u), out)
    print(out)
    return EXIT_PASS


def cmd_concavity(rc: RunConfig) -> int:
    from .concavity import concavity_defect
    from .transforms import apply

    u, tr = _field_and_transform(*rc.paths[:2])
    rep = concavity_defect(apply(tr, u), stride=rc.overrides.get("stride"))
    print(rep.to_json())
    return EXIT_PASS if rep.passes else EXIT_FAIL


def _apply_overrides(cfg: dict, overrides: dict) -> dict:
    for k in ("h", "tol", "stride"):
        if overrides.get(k) is not None and k in cfg:
            cfg[k] = overrides[k]
    if overrides.get("seed") is not None:
        if "seed" in cfg:
            cfg["seed"] = overrides["seed"]
        if "seeds" in cfg:
            cfg["seeds"] = [overrides["seed"] + s for s in range(len(cfg["seeds"]))]
    return cfg


def cmd_experiment(rc: RunConfig) -> int:
    from .experiments import NAMES, ExperimentResult, load_config, run_experiment

    target = rc.paths[0]
    names = list(NAMES) if target == "all" else [target]
    for n in names:
        if n not in NAMES:
            raise ConfigError(f"unknown experiment {n!r}; choose from {', '.join(NAMES)} or all")
    config_dir = rc.overrides.get("config_dir")
    if config_dir is None and Path("experiments").is_dir():
        config_dir = "experiments"
    configs = {}
    for n in names:
        try:
            configs[n] = _apply_overrides(load_config(n, config_dir), rc.overrides)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(str(exc)) from exc

    results = []
    if rc.workers > 1 and len(names) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=rc.workers) as pool:
            futures = [pool.submit(run_experiment, n, configs[n]) for n in names]
            for n, fut in zip(names, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001
                    results.append(ExperimentResult(n, [], config=configs[n],
                                                    error=f"{type(exc).__name__}: {exc}"))
    else:
        for n in names:
            try:
                results.append(run_experiment(n, configs[n]))
            except Exception as exc:  # noqa: BLE001
                # stop here: later verdicts are not computed after a runtime error
                results.append(ExperimentResult(n, [], config=configs[n],
                                                error=f"{type(exc).__name__}: {exc}"))
                break
    emit_report(results, output_root())
    for r in results:
        verdict = "ERROR" if r.error else ("PASS" if r.passed else "FAIL")
        print(f"{verdict} {r.name}" + (f": {r.error}" if r.error else ""))
    if any(r.error for r in results):
        return EXIT_ERROR
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


def cmd_report(rc: RunConfig) -> int:
    root = Path(rc.paths[0])
    if not root.is_dir():
        raise ConfigError(f"{root}: no such directory")
    reports = []
    for path in sorted(root.glob("*/report.json")):
        rep = _load_json(path)
        if not isinstance(rep, dict) or "cases" not in rep:
            raise ConfigError(f"{path}: not an experiment report")
        reports.append(rep)
    rows = [r for rep in reports for r in _summary_rows(rep)]
    write_csv(root / "summary.csv", rows, SUMMARY_COLUMNS)
    for rep in reports:
        n_pass = sum(c["passed"] for c in rep["cases"])
        state = "ERROR" if rep.get("error") else ("PASS" if rep["passed"] else "FAIL")
        print(f"{state} {rep['name']} ({n_pass}/{len(rep['cases'])} cases)")
    if any(rep.get("error") for rep in reports):
        return EXIT_ERROR
    return EXIT_PASS if all(rep["passed"] for rep in reports) else EXIT_FAIL


HANDLERS = {"solve": cmd_solve, "transform": cmd_transform, "concavity": cmd_concavity,
            "experiment": cmd_experiment, "report": cmd_report}


# --------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--h", type=float, help="grid spacing override")
    common.add_argument("--tol", type=float, help="solver tolerance override")
    common.add_argument("--stride", type=int, help="node stride of concavity scans")
    common.add_argument("--seed", type=int, help="random seed override")
    common.add_argument("--threads", type=int, help="worker processes for experiment all")
    common.add_argument("--reference-mode", action="store_true",
                        help="single worker, single-threaded BLAS, byte-stable reports")
    common.add_argument("--config-dir", help="directory of <name>.json experiment configs")

    parser = argparse.ArgumentParser(prog="concavity-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one problem").add_argument("config")
    p = sub.add_parser("transform", parents=[common], help="apply a transform to a field CSV")
    p.add_argument("field")
    p.add_argument("transform")
    p.add_argument("-o", "--output", help="output CSV path")
    p = sub.add_parser("concavity", parents=[common], help="concavity defect of a transformed field")
    p.add_argument("field")
    p.add_argument("transform")
    sub.add_parser("experiment", parents=[common],
                   help="run a named experiment or all").add_argument("name")
    sub.add_parser("report", parents=[common], help="summarize a report directory").add_argument("dir")
    return parser


def _overrides(ns) -> dict:
    ov = {k: getattr(ns, k, None) for k in ("h", "tol", "stride", "seed", "threads",
                                            "config_dir", "output")}
    ov["reference_mode"] = bool(ns.reference_mode)
    for k in ("h", "tol"):
        if ov[k] is not None and not ov[k] > 0:
            raise ConfigError(f"--{k} must be positive")
    for k in ("stride", "threads"):
        if ov[k] is not None and ov[k] < 1:
            raise ConfigError(f"--{k} must be at least 1")
    return ov


def make_run_config(ns) -> RunConfig:
    ov = _overrides(ns)
    if ns.command == "solve":
        return parse_config(ns.config, "solve", ov)
    if ns.command in ("transform", "concavity"):
        return RunConfig(ns.command, [ns.field, ns.transform], ov)
    if ns.command == "experiment":
        return RunConfig("experiment", [ns.name], ov)
    return RunConfig("report", [ns.dir], ov)


def run_command(rc: RunConfig) -> int:
    try:
        return HANDLERS[rc.command](rc)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_PASS
    if ns.reference_mode:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = "1"
    try:
        rc = make_run_config(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run_command(rc)


if __name__ == "__main__":
    sys.exit(main())
