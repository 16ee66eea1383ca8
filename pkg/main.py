"""Meanfield-Estimator: Kommandozeile.

    python main.py list
    python main.py run <preset|config.yaml> [--seed S] [--out DIR] [--threads K] [--burn-in T]
    python main.py dump <preset|config.yaml> [--out DIR] [--path-T T]

Exit-Code 0 nur, wenn alle Gitterpunkte erfolgreich waren.
"""

import argparse
import logging
import os
import sys
import time
from typing import List, Optional

import meanfield
from meanfield import config
from meanfield.exporters import export_density, export_eigenpairs, export_path
from meanfield.invariant import solve_self_consistency
from meanfield.models import SimConfig
from meanfield.presets import list_presets, resolve
from meanfield.result_store import save_result
from meanfield.simulator import simulate_ensemble
from meanfield.spectral import build_basis, solve_eigensystem

logger = logging.getLogger(__name__)


def _attach_file_log() -> None:
    os.makedirs(os.path.dirname(config.LOG_FILE), exist_ok=True)
    handler = logging.FileHandler(config.LOG_FILE, encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(message)s"))
    logging.getLogger().addHandler(handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meanfield",
        description="Parameterschätzung für Mean-Field-Teilchensysteme über Eigenfunktionen",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="Verfügbare Presets anzeigen")

    run = sub.add_parser("run", help="Experiment ausführen")
    run.add_argument("target", help="Preset-Name oder Pfad zu einer YAML-Konfiguration")
    run.add_argument("--seed", type=int, default=None, help="Startwert überschreiben")
    run.add_argument("--out", default=None, help="Ausgabeverzeichnis")
    run.add_argument("--threads", type=int, default=None, help="Größe des Arbeitspools")
    run.add_argument("--burn-in", type=float, default=None, help="Verworfene Anfangsdauer")

    dump = sub.add_parser("dump", help="Dichte, Eigenpaare und Pfade bei theta0 als CSV")
    dump.add_argument("target", help="Preset-Name oder Pfad zu einer YAML-Konfiguration")
    dump.add_argument("--out", default=None, help="Ausgabeverzeichnis")
    dump.add_argument("--path-T", type=float, default=None, help="Zusätzlich Pfade bis T simulieren")
    return parser


def cmd_list() -> int:
    presets = list_presets()
    if not presets:
        print(f"Keine Presets in {config.PRESETS_DIR}")
        return 1
    width = max(len(p["name"]) for p in presets)
    for p in presets:
        print(f"{p['name']:<{width}}  {p['experiment']:<15}  {p['description']}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = resolve(args.target)
    except ValueError as e:
        logger.error(str(e))
        return 2

    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "threads": args.threads,
        "burn_in": args.burn_in,
    }
    updates = {k: v for k, v in overrides.items() if v is not None}
    if updates:
        # erneut validieren (z.B. burn_in >= 0, threads >= 1)
        try:
            cfg = type(cfg).model_validate({**cfg.model_dump(), **updates})
        except ValueError as e:
            logger.error(f"Ungültige Überschreibung: {e}")
            return 2

    start = time.perf_counter()
    try:
        result = meanfield.run_experiment(cfg)
    except (ValueError, ArithmeticError, RuntimeError) as e:
        logger.error(f"Experiment {cfg.name} abgebrochen: {e}")
        return 1
    wall_time = time.perf_counter() - start

    paths = save_result(result, wall_time=wall_time)
    for check in result.checks:
        status = "ok" if check["passed"] else "VERFEHLT"
        print(f"{check['name']:<32} {status:<9} {check['value']:.6g}  ({check['target']})")
    print(f"Ergebnisse: {paths['table']}")
    if not result.ok:
        logger.error(f"{result.failures} Gitterpunkte fehlgeschlagen")
        return 1
    return 0


def cmd_dump(args: argparse.Namespace) -> int:
    """Schreibt rho, die Eigenpaare und optional simulierte Pfade zum Plotten."""
    try:
        cfg = resolve(args.target)
    except ValueError as e:
        logger.error(str(e))
        return 2

    out_dir = args.out or cfg.output_dir or config.RESULTS_DIR
    name = cfg.name or cfg.experiment
    potV, potW = cfg.build_potentials()
    theta = cfg.theta0()
    J = max([cfg.J, *cfg.J_grid])
    try:
        _, rho = solve_self_consistency(potV, potW, theta, theta.sigma, cfg.m0, cfg.grid_nodes)
        system = solve_eigensystem(build_basis(rho, cfg.K), rho, theta.sigma, J, cfg.normalization)
        written = [
            export_density(rho, os.path.join(out_dir, f"{name}_density.csv")),
            export_eigenpairs(system, os.path.join(out_dir, f"{name}_eigenpairs.csv")),
        ]
        if args.path_T:
            sim = SimConfig(N=cfg.N, T=args.path_T, h=cfg.h, sigma=theta.sigma, seed=cfg.seed)
            path = simulate_ensemble(sim, potV, potW, theta)
            written.append(export_path(path, os.path.join(out_dir, f"{name}_path.csv")))
    except (ValueError, ArithmeticError, RuntimeError) as e:
        logger.error(f"Dump {name} abgebrochen: {e}")
        return 1

    for filename in written:
        print(filename)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _attach_file_log()
    if args.command == "list":
        return cmd_list()
    if args.command == "dump":
        return cmd_dump(args)
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
