"""Command-line entry point.

Subcommands: ``generate-data``, ``run``, ``sweep``, ``check``. Results go to
``--out`` (CSV plus JSON summaries). On failure a single JSON line
``{"error": ..., "message": ..., "step": ...}`` is written to stderr and the
exit status is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ..errors import DdocoError
from .checks import check_run
from .config import ExperimentConfig, dump_config, load_config
from .experiment import prepare, run_experiment, sweep, write_outputs, write_trajectory_csv

EXIT_ERROR = 2
EXIT_CHECK_FAILED = 1


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--noise-case", type=int, choices=(1, 2, 3), help="1 noiseless, 2 data noise, 3 data and measurement noise")
    common.add_argument("--horizon", type=int, help="closed-loop horizon T")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ddoco", description="Data-driven online convex optimization runs")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate-data", parents=[common], help="record input/output data from the plant")
    sub.add_parser("run", parents=[common], help="one closed-loop run with regret")
    sw = sub.add_parser("sweep", parents=[common], help="grid over seeds, horizons and noise cases")
    sw.add_argument("--seeds", type=_int_list, default=[0], help="comma-separated seeds")
    sw.add_argument("--horizons", type=_int_list, help="comma-separated horizons")
    sw.add_argument("--noise-cases", type=_int_list, help="comma-separated noise cases")
    chk = sub.add_parser("check", parents=[common], help="run and verify the closed-loop identities")
    chk.add_argument("--tol", type=float, default=1e-6)
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.noise_case is not None:
        changes["noise"] = {"case": args.noise_case}
    if args.out is not None:
        changes["output"] = {"directory": str(args.out)}
    return cfg.replace(**changes) if changes else cfg


def _generate(cfg: ExperimentConfig) -> dict:
    setup = prepare(cfg)
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.output.prefix}_seed{cfg.seed}_case{cfg.noise.case}"
    write_trajectory_csv(setup.recorded, out / f"{stem}_data.csv")
    sys_ = setup.system
    matrices = {k: getattr(sys_, k).tolist() for k in "ABCD"}
    (out / f"{stem}_system.json").write_text(json.dumps(matrices, indent=2))
    dump_config(cfg, out / f"{stem}_config.yaml")
    return {"data": str(out / f"{stem}_data.csv"), "samples": len(setup.recorded)}


def _run(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.output.directory)
    try:
        record, report = run_experiment(cfg)
    except DdocoError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None and len(partial.realized):
            out.mkdir(parents=True, exist_ok=True)
            write_trajectory_csv(partial.realized, out / f"{cfg.output.prefix}_seed{cfg.seed}_partial.csv")
        raise
    info = write_outputs(cfg, record, report, out)
    dump_config(cfg, out / f"{cfg.output.prefix}_seed{cfg.seed}_case{cfg.noise.case}_T{cfg.horizon}_config.yaml")
    return info


def _sweep(cfg: ExperimentConfig, args) -> list[dict]:
    rows = sweep(cfg, args.seeds, args.horizons or [cfg.horizon], args.noise_cases or [cfg.noise.case])
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    names = list(dict.fromkeys(k for row in rows for k in row))
    with open(out / f"{cfg.output.prefix}_sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names)
        writer.writeheader()
        writer.writerows(rows)
    return rows


def _check(cfg: ExperimentConfig, tol: float) -> bool:
    setup = prepare(cfg)
    record, report = run_experiment(cfg, setup)
    results = check_run(record, report, setup.system, tol)
    for r in results:
        print(r.line())
    return all(r.passed for r in results)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        if args.command == "generate-data":
            print(json.dumps(_generate(cfg)))
        elif args.command == "run":
            print(json.dumps(_run(cfg)))
        elif args.command == "sweep":
            for row in _sweep(cfg, args):
                print(json.dumps(row))
        elif args.command == "check":
            return 0 if _check(cfg, args.tol) else EXIT_CHECK_FAILED
    except (DdocoError, OSError, ValueError) as exc:
        line = {"error": type(exc).__name__, "message": str(exc), "step": getattr(exc, "step", None)}
        print(json.dumps(line), file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
