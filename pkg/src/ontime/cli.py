"""Command-line entry point: ``python -m ontime <command> ...``.

Commands
    generate       draw a synthetic cohort and write it as CSV
    run            run an experiment config and write report files
    report         re-render a saved report.json
    verify         check the published-table identity
    inspect-masks  dump TabNet attention masks for rows of a CSV
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .experiment import (
    ConfigError,
    ExperimentConfig,
    StageError,
    inspect_masks,
    load_cohort,
    load_report,
    render_report,
    run_experiment,
    verify_published_identities,
    write_outputs,
)
from .synth import GenConfig, generate_cohort
from .tabular import write_csv

log = logging.getLogger("ontime")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ontime", description="On-time graduation experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    g = sub.add_parser("generate", help="write a synthetic cohort CSV")
    g.add_argument("--config", type=Path, help="JSON file with generator settings")
    g.add_argument("--out", type=Path, required=True, help="output CSV path")
    g.add_argument("--seed", type=int, help="generator seed (overrides the config)")
    g.add_argument("--n-students", type=int)
    g.add_argument("--signal-strength", type=float)
    g.add_argument("--missing-rate", type=float, help="share of rows with a missing cell")

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--out", type=Path, help="output directory (overrides the config)")
    r.add_argument("--seed", type=int, help="master seed (overrides the config)")
    r.add_argument("--format", choices=("text", "json"), default="text",
                   help="format echoed to stdout")

    rep = sub.add_parser("report", help="re-render a saved report")
    rep.add_argument("report", type=Path, help="path to report.json")
    rep.add_argument("--format", choices=("text", "json"), default="text")
    rep.add_argument("--out", type=Path, help="write here instead of stdout")

    v = sub.add_parser("verify", help="check P_err = (1 - recall) * prevalence on published rows")
    v.add_argument("--format", choices=("text", "json"), default="text")

    m = sub.add_parser("inspect-masks", help="dump TabNet masks for input rows")
    m.add_argument("--model", type=Path, required=True, help="bundle written by `run`")
    m.add_argument("--input", type=Path, required=True, help="canonical CSV")
    m.add_argument("--rows", type=int, help="only the first N usable rows")
    m.add_argument("--out", type=Path, help="write JSON here instead of stdout")
    return p


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _read_json(path: Path, what: str):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {str(path)!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {str(path)!r} is not valid JSON: {exc}") from None


def _cmd_generate(args) -> int:
    doc = _read_json(args.config, "generator config") if args.config else {}
    if "input" in doc:  # accept a full experiment config too
        doc = doc["input"].get("generate", {})
    cfg = GenConfig.from_json(doc)
    overrides = {k: v for k, v in (("seed", args.seed), ("n_students", args.n_students),
                                   ("signal_strength", args.signal_strength),
                                   ("missing_rate", args.missing_rate)) if v is not None}
    cfg = dataclasses.replace(cfg, **overrides)
    ds, truth = generate_cohort(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, args.out)
    log.info("wrote %d rows to %s (intercept %.4f)", ds.n_rows, args.out, truth.intercept)
    return 0


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    result = run_experiment(cfg)
    for path in write_outputs(result, cfg.output_dir):
        log.info("wrote %s", path)
    sys.stdout.write(render_report(result.report, args.format))
    return 0


def _cmd_report(args) -> int:
    try:
        report = load_report(args.report)
    except OSError as exc:
        raise ConfigError(f"cannot read report {str(args.report)!r}: {exc.strerror}") from None
    _emit(render_report(report, args.format), args.out)
    return 0


def _cmd_verify(args) -> int:
    rows, checks, text = verify_published_identities()
    if args.format == "json":
        doc = [{**dataclasses.asdict(r), "expected": c.expected, "residual": c.residual,
                "passed": c.passed} for r, c in zip(rows, checks)]
        text = json.dumps(doc, indent=2) + "\n"
    sys.stdout.write(text)
    return 0 if all(c.passed for c in checks) else 1


def _cmd_inspect(args) -> int:
    bundle = _read_json(args.model, "model bundle")
    doc = inspect_masks(bundle, load_cohort(args.input), args.rows)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "report": _cmd_report,
    "verify": _cmd_verify,
    "inspect-masks": _cmd_inspect,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)  # exits 2 on unknown flags or commands
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, StageError, FileNotFoundError, ValueError) as exc:
        print(f"ontime {args.command}: error: {exc}", file=sys.stderr)
        return 1
