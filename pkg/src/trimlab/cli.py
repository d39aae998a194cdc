"""Command-line entry point for the experiment harness."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness, report
from .harness import ExperimentConfig

WORKERS_ENV = "TRIMLAB_WORKERS"

_EXPERIMENTS = {
    "weak": "weak_convergence",
    "trim": "trimmed_law",
    "phi": "phi_concentration",
    "lemmas": "lemma_suite",
    "spectral": "spectral_suite",
    "propb": "property_b",
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file; flags override it")
    sub.add_argument("--seeds", type=int, help="number of independent orbits")
    sub.add_argument("--seed-base", type=int, help="first seed of the block")
    sub.add_argument("--n-max", type=int, help="largest checkpoint")
    sub.add_argument("--grid", help="comma-separated checkpoints (overrides the default geometric grid)")
    sub.add_argument("--psi", help="trimming function expression in n, e.g. 'n*log(n)**2'")
    sub.add_argument("--psi-class", choices=["summable", "divergent"])
    sub.add_argument("--epsilon", type=float, help="exceedance threshold factor")
    sub.add_argument("--out", help="output path; CSV/JSON and figures share its stem")
    sub.add_argument("--format", dest="fmt", choices=["csv", "json"])
    sub.add_argument("--workers", type=int, help="parallel workers (env %s overrides the default)" % WORKERS_ENV)


def _read_config_file(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemExit(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_INT_KEYS = {"seeds", "seed_base", "n_max", "workers"}
_FLOAT_KEYS = {"epsilon"}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {
        "experiment": _EXPERIMENTS[args.command],
        "seed_base": 20260823, "seeds": 100, "n_max": 10 ** 6,
        "grid": (), "psi_expr": None, "psi_class": None, "epsilon": 0.5,
        "out": None, "fmt": "csv", "workers": 1,
    }
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key == "psi":
                key = "psi_expr"
            if key == "format":
                key = "fmt"
            if key == "grid":
                values["grid"] = tuple(int(x) for x in raw.split(","))
                continue
            if key not in values:
                raise SystemExit(f"unknown config key: {key}")
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            else:
                values[key] = raw
    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        values["workers"] = int(env_workers)
    flag_map = {"seeds": "seeds", "seed_base": "seed_base", "n_max": "n_max",
                "psi": "psi_expr", "psi_class": "psi_class",
                "epsilon": "epsilon", "out": "out", "fmt": "fmt",
                "workers": "workers"}
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            values[key] = val
    if getattr(args, "grid", None):
        values["grid"] = tuple(int(x) for x in args.grid.split(","))
    return ExperimentConfig(**values)


def _persist(config: ExperimentConfig, result: dict) -> None:
    if config.out:
        if config.fmt == "csv":
            report.write_csv(result.get("rows", []), config.out)
            report.write_json(config, result.get("summary", {}),
                             report._stem(config.out) + "_summary.json")
        else:
            report.write_json(config, result.get("summary", {}), config.out)
        figures = report.render_figures(config, result, config.out)
        for path in figures:
            print(f"figure: {path}")
        print(f"wrote {config.out}")
    else:
        summary = dict(result.get("summary", {}))
        summary.pop("per_seed", None)
        json.dump(summary, sys.stdout, indent=2, default=str)
        print()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trimlab",
        description="Exact and Monte Carlo experiments for trimmed digit sums "
                    "over the doubling map")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("weak", "raw-sum ratio distribution against the iid oracle"),
        ("trim", "trimmed-sum ratios for a given trimming function"),
        ("phi", "return-time concentration diagnostics"),
        ("lemmas", "deterministic structural check suite"),
        ("spectral", "exact operator identity and bound suite"),
        ("propb", "characteristic-function factorization defect"),
    ]:
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "propb":
            sub.add_argument("--t", type=float, default=1.0,
                             help="characteristic-function argument")
    args = parser.parse_args(argv)
    config = build_config(args)

    if args.command == "weak":
        result = harness.run_weak_convergence(config)
    elif args.command == "trim":
        if config.psi_expr is None:
            parser.error("trim requires --psi")
        result = harness.run_trimmed_law(config)
    elif args.command == "phi":
        result = harness.run_phi_concentration(config)
    elif args.command == "lemmas":
        result = harness.run_lemma_suite(config)
    elif args.command == "spectral":
        result = harness.run_spectral_suite(config)
    else:
        defects = []
        for n in sorted({g for g in config.resolved_grid()}):
            k = n // 2
            if k < 1:
                continue
            defects.append(harness.property_b_defect(config, k, n - k, args.t))
            defects.append(harness.property_b_defect(config, k, n - k, args.t,
                                                     oracle=True))
        result = {"rows": [], "summary": {"experiment": "property_b",
                                          "defects": defects}}

    _persist(config, result)
    if "summary" in result and result["summary"].get("all_passed") is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
