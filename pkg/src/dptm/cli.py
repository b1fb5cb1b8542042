"""Command line entry point: ``dptm run <config>``, ``dptm report <dir>``.

Exit status: 0 success, 2 invalid config or arguments, 3 numerical failure
during a run (artifacts written so far are kept), 4 missing or mismatched
run artifacts.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import artifacts
from .artifacts import ArtifactError
from .config import RunConfig, config_from_dict, config_hash, default_config_text, load_config
from .errors import ConfigError, DPTMError

OUTPUT_ROOT_ENV = "DPTM_OUTPUT_ROOT"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ARTIFACT = 0, 2, 3, 4

log = logging.getLogger("dptm")


def resolve_output_dir(cfg: RunConfig, out: Optional[str] = None) -> Path:
    """``--out`` beats the config; a relative result is placed under ``$DPTM_OUTPUT_ROOT`` when set."""
    path = Path(out if out is not None else cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _check_run_dir(path: Path, chash: str) -> None:
    echo = path / "config.yaml"
    if echo.exists():
        existing = _read_echo(path)[1]
        if existing != chash:
            raise ArtifactError(f"{path} holds a run with config hash {existing[:12]}, refusing to mix")


def _read_echo(run_dir: Path) -> tuple[RunConfig, str]:
    echo = run_dir / "config.yaml"
    if not echo.exists():
        raise ArtifactError(f"{run_dir}: no config.yaml, not a run directory")
    text = echo.read_text()
    first = text.splitlines()[0] if text else ""
    if not first.startswith("# config_hash:"):
        raise ArtifactError(f"{echo}: missing config hash line")
    stated = first.split(":", 1)[1].strip()
    try:
        cfg = config_from_dict(artifacts.read_yaml(echo))
    except ConfigError as e:
        raise ArtifactError(f"{echo}: {e}") from None
    if config_hash(cfg) != stated:
        raise ArtifactError(f"{echo}: content does not match its stated hash")
    return cfg, stated


def cmd_run(args) -> int:
    from .pipeline import execute

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.dump_traces:
            cfg = replace(cfg, dump_traces=True)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    run_dir = resolve_output_dir(cfg, args.out)
    chash = config_hash(cfg)
    try:
        _check_run_dir(run_dir, chash)
    except ArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    print(f"run {chash[:12]} -> {run_dir}")
    try:
        result = execute(cfg, run_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError) as e:
        print(f"numerical failure: {e}; partial artifacts kept in {run_dir}", file=sys.stderr)
        return EXIT_NUMERIC
    m0, mR = result.metrics[0], result.metrics[-1]
    print(f"target accuracy r=0 {m0.target_accuracy:.4f} -> r={mR.r} {mR.target_accuracy:.4f}")
    sel = result.metrics[result.selected_r]
    print(f"selected r={result.selected_r} by nuclear norm, target accuracy {sel.target_accuracy:.4f}")
    return EXIT_OK


def _pct(v: float) -> str:
    return "     -" if math.isnan(v) else f"{100 * v:6.2f}"


def build_report(run_dir) -> str:
    """Human-readable summary of a completed or partial run directory."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ArtifactError(f"{run_dir}: no such directory")
    cfg, chash = _read_echo(run_dir)

    def check(name, stated):
        if stated != chash:
            raise ArtifactError(f"{name}: config hash {str(stated)[:12]} does not match run {chash[:12]}")

    metrics_hash, rows = artifacts.read_metrics(run_dir / "metrics.csv")
    check("metrics.csv", metrics_hash)
    ckpts = artifacts.list_checkpoints(run_dir)
    for p in ckpts:
        check(p.name, artifacts.read_yaml(p.with_suffix(".yaml")).get("config_hash"))
    for p in sorted((run_dir / "data").glob("*.yaml")):
        check(p.name, artifacts.read_yaml(p).get("config_hash"))
    traces = artifacts.list_traces(run_dir)
    trace_meta = []
    for p in traces:
        meta = artifacts.read_yaml(p.with_suffix(".yaml"))
        check(p.name, meta.get("config_hash"))
        trace_meta.append((p, meta))
    selection = None
    if (run_dir / "selection.yaml").exists():
        selection = artifacts.read_yaml(run_dir / "selection.yaml")
        check("selection.yaml", selection.get("config_hash"))

    complete = selection is not None and len(rows) == cfg.R + 1
    lines = [
        f"run {run_dir}  config {chash[:12]}  seed {cfg.seed}  R={cfg.R}  E={cfg.E}",
        f"status: {'complete' if complete else 'partial'} ({len(rows)} of {cfg.R + 1} rows, {len(ckpts)} checkpoints)",
        "",
        "   r   trust  trust_acc  non_trust  manipulated  target_acc  nuclear_norm",
    ]
    norms = selection["nuclear_norms"] if selection else []
    for row in rows:
        r = row["r"]
        norm = f"{norms[r]:12.4f}" if r < len(norms) else "           -"
        mark = " *" if selection and r == selection["selected_r"] else ""
        lines.append(
            f"{r:4d}  {row['trust_size']:6d}     {_pct(row['trust_accuracy'])}     {row['non_trust_size']:6d}"
            f"       {row['manipulated_size']:6d}      {_pct(row['target_accuracy'])}  {norm}{mark}"
        )
    lines.append("")
    if selection:
        best = selection.get("best_r")
        lines.append(
            f"selection: r={selection['selected_r']} (largest nuclear norm), target accuracy "
            f"{_pct(selection['selected_accuracy']).strip()}%; best r={best} at {_pct(selection['best_accuracy']).strip()}%"
        )
    else:
        lines.append("selection: not available (run incomplete)")
    if trace_meta:
        lines.append(f"traces: {len(trace_meta)} files")
        for p, meta in trace_meta:
            lines.append(f"  {p.name}: r={meta['r']} samples={meta['count']} steps={len(meta['timesteps'])} n={meta['n']}")
    else:
        lines.append("traces: none")
    return "\n".join(lines)


def cmd_report(args) -> int:
    try:
        print(build_report(args.run_dir))
    except (ArtifactError, DPTMError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(default_config_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dptm", description="Source-free domain adaptation with a pseudo-target domain.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug)")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a run from a YAML config")
    run.add_argument("config", help="path to the YAML config")
    run.add_argument("--seed", type=int, default=None, help="override the run seed")
    run.add_argument("--out", default=None, help=f"run directory (relative paths go under ${OUTPUT_ROOT_ENV} if set)")
    run.add_argument("--dump-traces", action="store_true", help="write manipulation trajectories")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summarize a run directory")
    rep.add_argument("run_dir")
    rep.set_defaults(func=cmd_report)

    cfg = sub.add_parser("config", help="print the default config")
    cfg.set_defaults(func=cmd_config)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
