"""Command-line entry points.

Three subcommands:

* ``tsousim simulate``  - write skeleton trajectories as CSV;
* ``tsousim cumulants`` - run a Monte Carlo cumulant experiment and write
  the err% table as CSV;
* ``tsousim validate``  - run the module invariant suite and print/write
  the text report (exit code 1 on failure).

A plain-text config file named by the ``TSOUSIM_CONFIG`` environment
variable supplies defaults as ``key = value`` lines (``#`` comments);
command-line flags override file values.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .harness import (
    ExperimentConfig,
    export_trajectories,
    run_experiment,
    validate_suite,
)

_CONFIG_ENV = "TSOUSIM_CONFIG"

_INT_KEYS = {"steps", "paths", "seed", "batches", "workers"}
_FLOAT_KEYS = {"alpha", "beta", "c", "b", "T", "x0", "dt", "target_g"}
_STR_KEYS = {"process", "method", "out"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def load_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; unknown keys are an error."""
    values: dict = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                key = key.replace("-", "_")
                if key not in _ALL_KEYS:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                if key in _INT_KEYS:
                    values[key] = int(value)
                elif key in _FLOAT_KEYS:
                    values[key] = float(value)
                else:
                    values[key] = value
    except OSError as exc:
        raise OSError(f"cannot read config file {path!r}: {exc}") from exc
    return values


def _experiment_parser(sub, name: str, help_: str) -> None:
    p = sub.add_parser(name, help=help_)
    p.add_argument("--process", choices=("cts-ou", "ou-cts"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--x0", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=("exact", "x1-only", "scaled-bdlp"))
    p.add_argument("--target-g", type=float, dest="target_g")
    p.add_argument("--batches", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsousim",
        description="Exact simulation of tempered-stable Ornstein-Uhlenbeck processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _experiment_parser(sub, "simulate", "write skeleton trajectories as CSV")
    _experiment_parser(sub, "cumulants", "Monte Carlo cumulant err% table")
    v = sub.add_parser("validate", help="run the invariant validation suite")
    v.add_argument("--out")
    return parser


_DEFAULTS = {
    "T": 1.0,
    "x0": 0.0,
    "steps": 1,
    "method": "exact",
    "target_g": 1.01,
    "batches": 100,
    "workers": 1,
    "out": None,
}

_REQUIRED = ("process", "alpha", "beta", "c", "b", "dt", "paths", "seed")


def _build_config(args: argparse.Namespace, file_values: dict) -> ExperimentConfig:
    merged = dict(_DEFAULTS)
    merged.update(file_values)
    for key in _ALL_KEYS:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            merged[key] = cli_val
    missing = [k for k in _REQUIRED if merged.get(k) is None]
    if missing:
        raise SystemExit(f"missing required parameters: {', '.join(missing)}")
    try:
        return ExperimentConfig(
            process=merged["process"],
            alpha=merged["alpha"],
            beta=merged["beta"],
            c=merged["c"],
            b=merged["b"],
            dt=merged["dt"],
            paths=merged["paths"],
            seed=merged["seed"],
            T=merged["T"],
            x0=merged["x0"],
            steps=merged["steps"],
            method=merged["method"],
            target_G=merged["target_g"],
            batches=merged["batches"],
            workers=merged["workers"],
            out=merged["out"],
        ).validate(check_batches=args.command == "cumulants")
    except ValueError as exc:
        raise SystemExit(f"invalid configuration: {exc}") from exc


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    file_values: dict = {}
    config_path = os.environ.get(_CONFIG_ENV)
    if config_path and args.command in ("simulate", "cumulants"):
        file_values = load_config_file(config_path)

    if args.command == "validate":
        report = validate_suite()
        text = report.to_text()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        sys.stdout.write(text)
        return 0 if report.passed else 1

    cfg = _build_config(args, file_values)
    if args.command == "simulate":
        if not cfg.out:
            raise SystemExit("simulate requires --out FILE")
        path = export_trajectories(cfg, count=cfg.paths)
        print(f"wrote {cfg.paths} trajectories ({cfg.steps} steps) to {path}")
        return 0

    table = run_experiment(cfg)
    for row in table.rows:
        print(
            f"k{row.k_order}: true={row.true:.6e} est={row.estimated:.6e} "
            f"err%={row.err_pct:+.3f} se={row.se:.3e}"
        )
    if cfg.out:
        print(f"wrote err table to {cfg.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
