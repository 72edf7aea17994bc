"""Experiment commands: single solves, sweeps, Moser assemblies and verification."""

import argparse
import logging
import math
import sys
from typing import Any, Dict, List

import numpy as np
from pydantic import ValidationError

from ..core.blowup import amplitude_ratios, boundary_flux, radial_lemma_metric, rescaled_profile
from ..core.exceptions import (
    DomainError,
    LogOverflow,
    NoBracket,
    NodalBlowupError,
    PreconditionError,
    RegionTooNarrow,
)
from ..core.moser import assemble_w, sample_assembly
from ..core.nonlinearity import Family, NonlinearityParams
from ..core.shooting import NodalSolution, solve_ground, solve_nodal
from ..core.sweep import STATUS_OK, SweepConfig, run_sweep
from ..tools.verification_checks import VerificationContext, build_manager, categories
from .serialization import meta_path, write_json, write_table

logger = logging.getLogger(__name__)

PROFILE_SAMPLES = 401
MOSER_SAMPLES = 201
MOSER_DEPTH = -60.0

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_BRACKET = 2
EXIT_STIFFNESS = 3
EXIT_VERIFY_FAILED = 4
EXIT_INTERNAL = 5


class ExperimentCommands:
    """Implementation of the nbl subcommands; each returns a process exit code."""

    def _blowup_section(self, sol: NodalSolution, rho_max: float, n_samples: int) -> Dict[str, Any]:
        reports: List[Dict[str, Any]] = []
        for region in sol.regions:
            try:
                reports.append(rescaled_profile(sol, region.index, rho_max, n_samples).to_dict())
            except RegionTooNarrow as e:
                logger.warning(e.message)
                reports.append({"region_index": region.index, "error": e.to_dict()})
        return {
            "bubble_reports": reports,
            "amplitude_ratios": amplitude_ratios(sol),
            "boundary_flux": boundary_flux(sol) if sol.k >= 1 else None,
            "radial_lemma_metric": radial_lemma_metric(sol),
        }

    def cmd_solve(self, args: argparse.Namespace) -> int:
        """Solve one nodal problem (or the ground problem for --k 0) and write a document."""
        if args.k == 0:
            sol, energy = solve_ground(args.lam, Family(args.family), args.boundary_tol, tol=args.tol)
            document = {"ground_energy": energy}
        else:
            if args.eps is None:
                raise argparse.ArgumentTypeError("--eps is required for k >= 1")
            p = NonlinearityParams(lam=args.lam, eps=args.eps, family=Family(args.family))
            sol = solve_nodal(p, args.k, args.boundary_tol, tol=args.tol)
            document = {}
        document.update(sol.to_dict(samples=PROFILE_SAMPLES))
        document.update(self._blowup_section(sol, args.rho_max, args.samples))
        write_json(document, args.out)
        return EXIT_OK

    def cmd_ground(self, args: argparse.Namespace) -> int:
        """Solve the eps = 0 ground problem and report I0(u0)."""
        sol, energy = solve_ground(args.lam, Family(args.family), args.boundary_tol, tol=args.tol)
        document = {"I0": energy, **sol.to_dict(samples=PROFILE_SAMPLES)}
        write_json(document, args.out)
        return EXIT_OK

    def cmd_sweep(self, args: argparse.Namespace) -> int:
        """Run an eps-sweep; rows that fail keep their status and the sweep continues."""
        options = {
            "lam": args.lam,
            "k": args.k if args.k is not None else 1,
            "eps_list": args.eps_list,
            "family": Family(args.family),
            "rho_max": args.rho_max,
            "n_samples": args.samples,
            "out": args.out,
        }
        if args.boundary_tol is not None:
            options["boundary_tol"] = args.boundary_tol
        if args.tol is not None:
            options["integrator_tol"] = args.tol
        cfg = SweepConfig(**options)
        table, meta = run_sweep(cfg)
        write_table(table, cfg.out, args.format or "csv")
        if cfg.out is not None:
            write_json(meta, meta_path(cfg.out))

        statuses = [row["status"] for row in meta["rows"]]
        if STATUS_OK in statuses:
            return EXIT_OK
        if "NoBracket" in statuses:
            return EXIT_NO_BRACKET
        return EXIT_STIFFNESS

    def cmd_moser(self, args: argparse.Namespace) -> int:
        """Assemble the projected Moser test function at (lambda, eps, k)."""
        if args.eps is None:
            raise argparse.ArgumentTypeError("--eps is required for moser")
        k = args.k if args.k is not None else 1
        ground, _ = solve_ground(args.lam, Family(args.family), args.boundary_tol, tol=args.tol)
        p = NonlinearityParams(lam=args.lam, eps=args.eps, family=Family(args.family))
        assembly = assemble_w(k, args.log_R, p, ground)
        finite = [level.log_l for level in assembly.log_params if math.isfinite(level.log_l)]
        start = max(min(finite, default=args.log_R) - 1.0, MOSER_DEPTH)
        log_r = np.linspace(start, 0.0, MOSER_SAMPLES)
        document = {
            **assembly.to_dict(),
            "I0": ground.total_functional,
            "samples": {"log_r": log_r, "w": sample_assembly(assembly, ground, log_r)},
        }
        if args.compare:
            sol = solve_nodal(p, k, args.boundary_tol, tol=args.tol)
            document["solution_energy"] = sol.total_functional
            document["upper_bound_holds"] = assembly.total_energy >= sol.total_functional
        write_json(document, args.out)
        return EXIT_OK

    def cmd_verify(self, args: argparse.Namespace) -> int:
        """Run the verification suite; exit 0 iff every gating check passes."""
        manager = build_manager()
        report = manager.run(VerificationContext(), categories(args.trends))
        for result in report.results:
            status = "PASS" if result.passed else ("FAIL" if result.gating else "WARN")
            value = "" if result.value is None else f" value={result.value:.6g}"
            sys.stdout.write(f"{status:4} {result.category.value:12} {result.name}{value}\n")
        if args.out is not None:
            write_json(report.to_dict(), args.out)
        passed = sum(r.passed for r in report.results)
        logger.info(f"Verification: {passed}/{len(report.results)} checks passed")
        return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def exit_code_for(error: Exception) -> int:
    """Exit code of an error escaping a command."""
    if isinstance(error, NoBracket):
        return EXIT_NO_BRACKET
    if isinstance(error, (PreconditionError, DomainError, LogOverflow, ValidationError, argparse.ArgumentTypeError)):
        return EXIT_USAGE
    if isinstance(error, NodalBlowupError):
        return EXIT_STIFFNESS
    return EXIT_INTERNAL


def error_document(error: Exception) -> Dict[str, Any]:
    """Machine-readable error object for stderr."""
    if isinstance(error, NodalBlowupError):
        return error.to_dict()
    details: Dict[str, Any] = {}
    if isinstance(error, ValidationError):
        details["fields"] = [".".join(str(part) for part in err.get("loc", ())) for err in error.errors()]
    name = "PreconditionError" if isinstance(error, ValidationError) else type(error).__name__
    return {"error": name, "message": str(error), "details": details}
