"""
Convergence sweeps over (alpha, N, M) cells.

Cells are independent solver runs. They execute on a local thread pool or, when
use_celery is set, as a Celery group; rows always come back in config order.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import repeat
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .. import __version__
from ..config import get_settings
from ..exceptions import ConfigValidationError
from .kernel_coeffs import derive_sigma
from .pde_solver import SCHEMES, SpatialGrid, solve
from .problems import resolve_problem

logger = logging.getLogger(__name__)

CSV_HEADER = ("alpha", "N", "M", "scheme", "E", "order", "seconds")
GRADED_SCHEMES = ("h3n3-graded", "h3n3-graded-fast")

# first level entering E: ex51 measures from k = 0, ex52 from k = 1
FIRST_ERROR_LEVEL = {"ex51": 0, "ex52": 1}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    example: str = "ex51"
    scheme: str = "h3n3-fast"
    alphas: List[float]
    n_list: List[int]
    m_list: List[int]
    r: float = 1.0
    soe_epsilon: float = 1e-12
    output: Optional[str] = None
    record_timing: bool = True

    @field_validator("scheme")
    @classmethod
    def _known_scheme(cls, value: str) -> str:
        if value not in SCHEMES:
            raise ValueError(f"unknown scheme {value!r}; expected one of {', '.join(SCHEMES)}")
        return value

    @field_validator("alphas")
    @classmethod
    def _admissible_orders(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one alpha is required")
        for alpha in value:
            derive_sigma(alpha)
        return value

    @field_validator("n_list", "m_list")
    @classmethod
    def _refinement_list(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("refinement lists must be nonempty")
        if min(value) < 2:
            raise ValueError(f"every entry must be >= 2, got {value}")
        for coarse, fine in zip(value, value[1:]):
            if fine != 2 * coarse:
                raise ValueError(f"refinements must double, got {coarse} -> {fine}")
        return value

    @field_validator("soe_epsilon")
    @classmethod
    def _epsilon_range(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"soe_epsilon must lie in (0, 1), got {value}")
        return value

    @model_validator(mode="after")
    def _grading_matches_scheme(self):
        if self.r < 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {self.r}")
        if self.r != 1.0 and self.scheme not in GRADED_SCHEMES:
            raise ValueError(f"r={self.r} needs a graded scheme, got {self.scheme}")
        return self

    @classmethod
    def build(cls, **values) -> "ExperimentConfig":
        """Construct or raise ConfigValidationError."""
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigValidationError(str(e)) from e
        except ValueError as e:
            raise ConfigValidationError(str(e)) from e

    def cells(self) -> List[Tuple[float, int, int]]:
        return [(alpha, n, m) for alpha in self.alphas for m in self.m_list for n in self.n_list]


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in str(text).split(",") if item.strip()]
    except ValueError as e:
        raise ConfigValidationError(f"Expected a comma separated list of numbers, got {text!r}") from e


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in str(text).split(",") if item.strip()]
    except ValueError as e:
        raise ConfigValidationError(f"Expected a comma separated list of integers, got {text!r}") from e


_FILE_KEYS = {
    "example": str,
    "scheme": str,
    "alpha": parse_float_list,
    "n": parse_int_list,
    "m": parse_int_list,
    "r": float,
    "eps": float,
    "out": str,
}
_FIELD_NAMES = {"alpha": "alphas", "n": "n_list", "m": "m_list", "eps": "soe_epsilon", "out": "output"}


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a flat key=value file into ExperimentConfig field values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigValidationError(f"Config file {path} does not exist")
    values: Dict[str, Any] = {}
    for key, raw in dotenv_values(path).items():
        name = key.lower()
        if name not in _FILE_KEYS:
            raise ConfigValidationError(f"Unknown config key {key!r} in {path}")
        if raw is None:
            continue
        try:
            values[_FIELD_NAMES.get(name, name)] = _FILE_KEYS[name](raw)
        except ValueError as e:
            raise ConfigValidationError(f"Bad value for {key} in {path}: {e}") from e
    return values


@dataclass(frozen=True)
class ConvergenceRow:
    alpha: float
    N: int
    M: int
    scheme: str
    E: float
    order: Optional[float] = None
    seconds: Optional[float] = None


@dataclass
class ConvergenceReport:
    scheme: str
    example: str
    soe_epsilon: float
    rows: List[ConvergenceRow] = field(default_factory=list)
    build_id: str = f"fracwave {__version__}"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([
                f"{row.alpha:g}",
                row.N,
                row.M,
                row.scheme,
                f"{row.E:.6g}",
                "" if row.order is None else f"{row.order:.4f}",
                "" if row.seconds is None else f"{row.seconds:.3f}",
            ])
        return buffer.getvalue()

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        logger.info(f"Wrote {len(self.rows)} rows to {path}")
        return path

    def to_table(self) -> str:
        header = ("alpha", "N", "M", "E", "Order", "CPU(s)")
        lines = [
            (
                f"{row.alpha:g}",
                str(row.N),
                str(row.M),
                f"{row.E:.4e}",
                "*" if row.order is None else f"{row.order:.4f}",
                "" if row.seconds is None else f"{row.seconds:.2f}",
            )
            for row in self.rows
        ]
        widths = [max(len(h), *(len(line[i]) for line in lines)) if lines else len(h) for i, h in enumerate(header)]
        title = f"{self.example} / {self.scheme} (soe eps={self.soe_epsilon:g})"
        out = [title, "  ".join(h.rjust(w) for h, w in zip(header, widths))]
        out.extend("  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in lines)
        return "\n".join(out)


def run_cell(config: Dict[str, Any], alpha: float, N: int, M: int) -> Dict[str, Any]:
    """Solve one cell and measure its error; config is a JSON-ready ExperimentConfig dump."""
    problem = resolve_problem(config["example"], alpha)
    if problem.exact is None:
        raise ConfigValidationError(f"Problem {problem.name} has no exact solution to measure errors against")
    grid = SpatialGrid(L=problem.L, M=M)
    result = solve(problem, grid, N, config["scheme"], r=config.get("r", 1.0), soe_epsilon=config.get("soe_epsilon"))
    first_level = FIRST_ERROR_LEVEL.get(config["example"], 0)
    error = result.max_error(problem.exact, first_level=first_level)
    logger.info(
        f"Cell alpha={alpha} N={N} M={M} {config['scheme']}: E={error:.4e}",
        extra={"alpha": alpha, "N": N, "M": M, "seconds": result.timings["total"]},
    )
    return {
        "alpha": alpha,
        "N": N,
        "M": M,
        "scheme": config["scheme"],
        "E": error,
        "seconds": result.timings["total"],
    }


def execute_cells(config: ExperimentConfig) -> List[Dict[str, Any]]:
    settings = get_settings()
    payload = config.model_dump(mode="json")
    cells = config.cells()

    if settings.use_celery:
        from celery import group

        from ..tasks.sweep_tasks import run_cell_task

        logger.info(f"Dispatching {len(cells)} cells to Celery")
        job = group(run_cell_task.s(payload, alpha, n, m) for alpha, n, m in cells)
        return job.apply_async().get()

    workers = max(1, min(settings.threads, len(cells)))
    # the tridiagonal sweeps release the GIL, so cells overlap on threads
    logger.info(f"Running {len(cells)} cells on {workers} threads")
    alphas, ns, ms = zip(*cells)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run_cell, repeat(payload), alphas, ns, ms))


def observed_order(coarse_error: float, fine_error: float) -> Optional[float]:
    if coarse_error > 0.0 and fine_error > 0.0:
        return math.log2(coarse_error / fine_error)
    return None


def assemble_report(config: ExperimentConfig, results: List[Dict[str, Any]]) -> ConvergenceReport:
    """Attach orders against the halved N (or, failing that, halved M) row of the same alpha."""
    by_cell = {(r["alpha"], r["N"], r["M"]): r["E"] for r in results}
    report = ConvergenceReport(scheme=config.scheme, example=config.example, soe_epsilon=config.soe_epsilon)
    for r in results:
        alpha, n, m = r["alpha"], r["N"], r["M"]
        coarse = by_cell.get((alpha, n // 2, m)) if n % 2 == 0 else None
        if coarse is None and m % 2 == 0:
            coarse = by_cell.get((alpha, n, m // 2))
        report.rows.append(ConvergenceRow(
            alpha=alpha,
            N=n,
            M=m,
            scheme=r["scheme"],
            E=r["E"],
            order=None if coarse is None else observed_order(coarse, r["E"]),
            seconds=r["seconds"] if config.record_timing else None,
        ))
    return report


def run_convergence(config: ExperimentConfig) -> ConvergenceReport:
    report = assemble_report(config, execute_cells(config))
    if config.output:
        report.write_csv(config.output)
    return report


def run_example_51(config: ExperimentConfig) -> ConvergenceReport:
    """Smooth benchmark; E is the max error over levels 0..N."""
    if config.example != "ex51":
        config = config.model_copy(update={"example": "ex51"})
    return run_convergence(config)


def run_example_52(config: ExperimentConfig) -> ConvergenceReport:
    """Weakly regular benchmark on a graded mesh; E is the max error over levels 1..N."""
    if config.scheme not in GRADED_SCHEMES:
        raise ConfigValidationError(f"The weakly regular benchmark runs on graded schemes, got {config.scheme}")
    if config.example != "ex52":
        config = config.model_copy(update={"example": "ex52"})
    return run_convergence(config)


