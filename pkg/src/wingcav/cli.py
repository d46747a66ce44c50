"""Command-line entry point.

Subcommands: modes, mirror, qed-dynamics, qed-spectrum, pipeline, sweep.
Exit codes: 0 ok, 2 config error, 3 solver non-convergence, 4 mirror-stage
error, 5 steady-state error. Results are cached by run id when --cache (or
the WINGCAV_CACHE environment variable) names a directory.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .cache import ResultCache, resolve_cache_dir, run_id
from .config import load_config
from .errors import (ConfigError, ConvergenceError, FactorizationError,
                     GeometryError, NumericalError, ParameterError,
                     ResolutionError, SingularLiouvillian, StepFailure)
from .pipeline import STAGE_RUNNERS, exit_code_for, run_stage

log = logging.getLogger("wingcav")

_STAGES = ("modes", "mirror", "qed-dynamics", "qed-spectrum", "pipeline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wingcav",
        description="Winged-cavity QED workbench: eigenmodes, mirror stacks, "
                    "dissipative Jaynes-Cummings dynamics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES + ("sweep",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--cache", default=None, help="cache directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        p.add_argument("--seed", type=int, default=None, help="override solver.seed")
        if name == "modes":
            p.add_argument("--dump-geometry", default=None, metavar="DIR",
                           help="write eps/pec grid files per sweep point")
            p.add_argument("--dump-modes", default=None, metavar="DIR",
                           help="write accepted mode fields as grid files")
    return parser


def _setup_logging():
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(
        "%(asctime)s %(levelname)s %(name)s %(message)s"))
    root = logging.getLogger()
    if not root.handlers:
        root.addHandler(handler)
        root.setLevel(logging.INFO)


def _dump_artifacts(args, resolved):
    from .fdfd import PmlParams, find_modes
    from .gridio import write_grid, write_mode
    from .pipeline import cavity_from_cfg
    from .geometry import build_geometry, grid_for_cavity
    import math

    sol = resolved["solver"]
    params = cavity_from_cfg(resolved)
    grid = grid_for_cavity(params, sol["ppw"], sol["shift_ghz"] * 1e9)
    mat = build_geometry(params, grid)
    if args.dump_geometry:
        out = Path(args.dump_geometry)
        out.mkdir(parents=True, exist_ok=True)
        write_grid(out / "eps.grid", mat.eps, mat.dx)
        write_grid(out / "pec.grid", mat.pec_mask.astype(float), mat.dx)
    if args.dump_modes:
        out = Path(args.dump_modes)
        out.mkdir(parents=True, exist_ok=True)
        pml = PmlParams(width=params.l_pml, order=sol["pml_order"],
                        target_reflection=sol["pml_target_reflection"])
        modes = find_modes(mat, pml, 2 * math.pi * sol["shift_ghz"] * 1e9,
                           sol["n_modes"], sol["seed"],
                           max_pml_fraction=sol["max_pml_energy_fraction"],
                           refine=sol["refine"])
        for i, mode in enumerate(modes):
            write_mode(out / f"mode_{i:03d}.grid", mode)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        resolved = load_config(args.config)
        if args.seed is not None:
            resolved["solver"]["seed"] = args.seed
        stage = args.command
        if stage == "sweep":
            stage = resolved["sweep"]["stage"]
            if stage is None:
                raise ConfigError("sweep.stage must name the stage to run")
        if stage not in STAGE_RUNNERS:
            raise ConfigError(f"unknown stage {stage!r}")
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2

    cache_dir = resolve_cache_dir(args.cache)
    cache = ResultCache(cache_dir) if cache_dir else None
    rid = run_id(stage, resolved)

    out_path = args.out or resolved["sweep"]["output_path"] or f"{stage}.csv"

    if cache is not None:
        hit = cache.lookup(rid)
        if hit is not None:
            log.info("cache hit run_id=%s rows reused", rid)
            Path(out_path).write_bytes(hit)
            print(out_path)
            return 0

    try:
        if getattr(args, "dump_geometry", None) or getattr(args, "dump_modes", None):
            _dump_artifacts(args, resolved)
        csv_bytes, worst = run_stage(stage, resolved, jobs=args.jobs, cache=cache)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (GeometryError, ResolutionError) as exc:
        log.error("geometry error: %s", exc)
        return 2
    except (ConvergenceError, FactorizationError, StepFailure) as exc:
        log.error("solver error: %s", exc)
        return 3
    except (ParameterError, NumericalError) as exc:
        log.error("mirror-stage error: %s", exc)
        return 4
    except SingularLiouvillian as exc:
        log.error("steady-state error: %s", exc)
        return 5
    except Exception as exc:  # pragma: no cover - defensive
        log.error("unexpected failure: %s: %s", type(exc).__name__, exc)
        return exit_code_for(exc)

    # rows carrying run_id make cached artifacts self-describing
    csv_bytes = _append_run_id_column(csv_bytes, rid)
    if cache is not None:
        cache.store(rid, csv_bytes)
    Path(out_path).write_bytes(csv_bytes)
    log.info("stage=%s run_id=%s out=%s exit=%d", stage, rid, out_path, worst)
    print(out_path)
    return worst


def _append_run_id_column(csv_bytes: bytes, rid: str) -> bytes:
    lines = csv_bytes.decode().split("\n")
    out = []
    for i, line in enumerate(lines):
        if not line:
            out.append(line)
            continue
        out.append(line + ("," + ("run_id" if i == 0 else rid)))
    return "\n".join(out).encode()


if __name__ == "__main__":
    sys.exit(main())
