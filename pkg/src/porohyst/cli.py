"""Command line front end.

    simulate --config scenario.json [--out DIR] [--tau-refine N] [--validate-only]

Exit codes: 0 ok, 2 bad config, 3 hypothesis violation, 4 solver failure,
5 output I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import kernels
from .errors import PorohystError
from .runner import run, tau_refinement
from .scenario import load_config, load_memory_file
from .stepper import init_state


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description=(
            "Implicit simulator for degenerate porous-medium diffusion with "
            "Preisach pressure-saturation hysteresis"
        ),
    )
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--tau-refine",
        type=int,
        default=None,
        metavar="LEVELS",
        help="run a step-size refinement study with this many levels",
    )
    parser.add_argument(
        "--validate-only",
        action="store_true",
        help="parse the config, build the initial state, validate and exit",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = load_config(args.config)
        if args.validate_only:
            problem = scenario.problem()
            mode = scenario.memory_mode
            memory_xi = None
            if mode not in ("auto_admissible", "virgin_clamped"):
                memory_xi = load_memory_file(mode, problem.grid, problem.tgrid)
                mode = "file"
            init_state(problem, scenario.initial_field(problem.grid), mode, memory_xi)
            print(f"config ok ({problem.grid.ncells} cells, kernels: {kernels.BACKEND})")
            return 0
        if args.tau_refine is not None:
            rows = tau_refinement(scenario, args.tau_refine, out_dir=args.out)
            print("tau_coarse,tau_fine,sup_diff")
            for row in rows:
                print(f"{row['tau_coarse']:g},{row['tau_fine']:g},{row['sup_diff']:.6e}")
            return 0
        result = run(scenario, out_dir=args.out)
        summary = result.summary
        steady = summary["steady_time"]
        print(
            f"done: {result.diagnostics['steps']} steps, "
            f"u_bar={summary['u_bar']:.8g}, "
            f"dissipation={summary['dissipation_total']:.6g}, "
            f"steady_time={'-' if steady is None else f'{steady:g}'}"
        )
        return 0
    except PorohystError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in getattr(exc, "violations", [])[:50]:
            print(
                f"  cell {v.cell}: {v.condition} violated by {v.magnitude:.3e}",
                file=sys.stderr,
            )
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
