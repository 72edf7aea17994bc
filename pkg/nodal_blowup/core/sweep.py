"""
eps-sweeps at fixed (lambda, k): one solve and one row of diagnostics per eps.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .blowup import (
    amplitude_ratios,
    boundary_flux,
    outer_deviation,
    quantization_gaps,
    radial_lemma_metric,
    rescaled_profile,
)
from .config import config
from .exceptions import NodalBlowupError, RegionTooNarrow
from .nonlinearity import LAMBDA_1, Family, NonlinearityParams
from .shooting import NodalSolution, solve_ground, solve_nodal

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
STATUS_OK = "ok"


class SweepConfig(BaseModel):
    """Parameters of an eps-sweep."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lam: float = Field(1.0, alias="lambda")
    k: int = Field(1, ge=1)
    eps_list: List[float]
    family: Family = Family.MT_PLUS
    rho_max: float = Field(5.0, gt=0.0)
    n_samples: int = Field(200, ge=2)
    boundary_tol: float = Field(default_factory=lambda: config.tolerances["boundary"])
    integrator_tol: float = Field(default_factory=lambda: config.tolerances["integrator"])
    out: Optional[str] = None
    meta_out: Optional[str] = None

    @field_validator("lam")
    @classmethod
    def _check_lambda(cls, value: float) -> float:
        if not 0.0 < value < LAMBDA_1:
            raise ValueError(f"lambda must lie in (0, {LAMBDA_1:.10f}), got {value}")
        return value

    @field_validator("eps_list")
    @classmethod
    def _check_eps_list(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("eps_list must not be empty")
        if any(not 0.0 < e < 1.0 for e in value):
            raise ValueError(f"every eps must lie in (0, 1), got {value}")
        if any(b >= a for a, b in zip(value[:-1], value[1:])):
            raise ValueError(f"eps_list must be strictly decreasing, got {value}")
        return value

    @model_validator(mode="after")
    def _check_tolerances(self) -> "SweepConfig":
        if self.boundary_tol <= 0.0 or self.integrator_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        return self

    def params(self, eps: float) -> NonlinearityParams:
        return NonlinearityParams(lam=self.lam, eps=eps, family=self.family)


def sweep_columns(k: int) -> List[str]:
    """The documented header of a sweep table."""
    regions = range(1, k + 2)
    zeros = range(1, k + 1)
    columns = ["eps", "status"]
    columns += [f"amplitude_{i}" for i in regions]
    columns += [f"r_{i}" for i in zeros]
    columns += [f"log_r_{i}" for i in zeros]
    columns += [f"dirichlet_{i}" for i in regions]
    columns += [f"functional_{i}" for i in regions]
    columns += [f"gamma_{i}" for i in regions]
    columns += [f"delta_{i}" for i in regions]
    columns += [f"log_delta_{i}" for i in regions]
    columns += [f"sup_deviation_{i}" for i in regions]
    columns += [f"ratio_{i}" for i in zeros]
    columns += ["boundary_flux", "total_I", "I0_reference", "radial_lemma_metric",
                "dirichlet_gap", "functional_gap", "outer_deviation"]
    return columns


def solution_row(cfg: SweepConfig, eps: float, sol: NodalSolution, ground: Optional[NodalSolution]) -> Dict[str, Any]:
    """Diagnostics of one certified solution, keyed by sweep column."""
    row: Dict[str, Any] = {"eps": eps, "status": STATUS_OK}
    for region in sol.regions:
        i = region.index
        row[f"amplitude_{i}"] = region.amplitude
        row[f"dirichlet_{i}"] = region.dirichlet
        row[f"functional_{i}"] = region.functional
        try:
            report = rescaled_profile(sol, i, cfg.rho_max, cfg.n_samples)
            row[f"gamma_{i}"] = report.gamma
            row[f"delta_{i}"] = report.delta
            row[f"log_delta_{i}"] = report.log_delta
            row[f"sup_deviation_{i}"] = report.sup_deviation
        except RegionTooNarrow as e:
            logger.warning(f"eps={eps}: {e.message}")
    for i, t in enumerate(sol.log_zeros, start=1):
        row[f"r_{i}"] = math.exp(t)
        row[f"log_r_{i}"] = t
    for i, ratio in enumerate(amplitude_ratios(sol), start=1):
        row[f"ratio_{i}"] = ratio
    row["boundary_flux"] = boundary_flux(sol)
    row["total_I"] = sol.total_functional
    row["radial_lemma_metric"] = radial_lemma_metric(sol)
    if ground is not None:
        gaps = quantization_gaps(sol, ground)
        row["I0_reference"] = ground.total_functional
        row["dirichlet_gap"] = gaps.dirichlet_gap
        row["functional_gap"] = gaps.functional_gap
        row["outer_deviation"] = outer_deviation(sol, ground)
    return row


def _sweep_row(cfg: SweepConfig, eps: float, ground: Optional[NodalSolution]) -> Dict[str, Any]:
    try:
        sol = solve_nodal(cfg.params(eps), cfg.k, cfg.boundary_tol, tol=cfg.integrator_tol)
        row = solution_row(cfg, eps, sol, ground)
        logger.info(f"Sweep row eps={eps} done")
        return row
    except NodalBlowupError as e:
        logger.warning(f"Sweep row eps={eps} failed: {type(e).__name__}: {e.message}")
        return {"eps": eps, "status": type(e).__name__}


def run_sweep(cfg: SweepConfig) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """
    Solve every eps of the sweep, in parallel, and collect rows in eps order.

    Returns:
        (table with the documented header, metadata document)
    """
    ground: Optional[NodalSolution] = None
    ground_status = STATUS_OK
    try:
        ground, _ = solve_ground(cfg.lam, cfg.family, cfg.boundary_tol, tol=cfg.integrator_tol)
    except NodalBlowupError as e:
        ground_status = type(e).__name__
        logger.warning(f"Ground solve failed: {e.message}; reference columns left empty")

    workers = max(1, min(config.threads, len(cfg.eps_list)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda eps: _sweep_row(cfg, eps, ground), cfg.eps_list))

    columns = sweep_columns(cfg.k)
    table = pd.DataFrame(rows).reindex(columns=columns)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "columns": columns,
        "config": cfg.model_dump(mode="json", by_alias=True, exclude={"out", "meta_out"}),
        "ground": {
            "status": ground_status,
            "amplitude": None if ground is None else ground.amplitude,
            "I0": None if ground is None else ground.total_functional,
        },
        "rows": [{"eps": row["eps"], "status": row["status"]} for row in rows],
    }
    return table, meta


def succeeded_prefix(table: pd.DataFrame) -> pd.DataFrame:
    """Leading rows up to the first failed solve."""
    ok = (table["status"] == STATUS_OK).tolist()
    n = ok.index(False) if False in ok else len(ok)
    return table.iloc[:n]


def is_strictly_decreasing(values) -> bool:
    values = [float(v) for v in values]
    return len(values) >= 2 and all(math.isfinite(v) for v in values) and all(
        b < a for a, b in zip(values[:-1], values[1:])
    )


def blowup_regime(table: pd.DataFrame) -> pd.DataFrame:
    """Rows from the smallest amplitude_1 on, where the inner amplitude grows as eps decreases."""
    if table.empty:
        return table
    start = int(pd.to_numeric(table["amplitude_1"]).reset_index(drop=True).idxmin())
    return table.iloc[start:]
