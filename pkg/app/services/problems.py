"""
Problem definitions: the two manufactured benchmarks and user specs written as
sympy expressions in x and t (and optionally alpha).
"""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, Optional, Union

import numpy as np
import sympy as sym
from dotenv import dotenv_values

from ..exceptions import ConfigValidationError
from .kernel_coeffs import derive_sigma
from .pde_solver import ProblemSpec
from .special_functions import gamma

logger = logging.getLogger(__name__)

EXAMPLE_IDS = ("ex51", "ex52")


def example_51(alpha: float) -> ProblemSpec:
    """Smooth benchmark u = t^5 sin(pi x) / 5 with zero initial data."""
    derive_sigma(alpha)
    scale = 24.0 / gamma(6.0 - alpha)
    pi = math.pi

    def source(x, t):
        return (scale * t ** (5.0 - alpha) + pi * pi * t ** 5 / 5.0) * np.sin(pi * x)

    def exact(x, t):
        return t ** 5 / 5.0 * np.sin(pi * x)

    return ProblemSpec(
        source=source,
        initial_value=np.zeros_like,
        initial_velocity=np.zeros_like,
        alpha=alpha,
        exact=exact,
        name="ex51",
    )


def example_52(alpha: float) -> ProblemSpec:
    """Weakly regular benchmark u = (t^alpha + 1) sin(pi x); u_tt blows up at t = 0."""
    derive_sigma(alpha)
    head = gamma(1.0 + alpha)
    pi = math.pi

    def source(x, t):
        return (head + pi * pi * (t ** alpha + 1.0)) * np.sin(pi * x)

    def exact(x, t):
        return (t ** alpha + 1.0) * np.sin(pi * x)

    def initial_value(x):
        return np.sin(pi * np.asarray(x, dtype=float))

    return ProblemSpec(
        source=source,
        initial_value=initial_value,
        initial_velocity=np.zeros_like,
        alpha=alpha,
        exact=exact,
        name="ex52",
    )


BUILTIN_PROBLEMS: Dict[str, Callable[[float], ProblemSpec]] = {
    "ex51": example_51,
    "ex52": example_52,
}


def _as_field(function: Callable, arity: int) -> Callable:
    # lambdified constants return scalars
    if arity == 1:
        return lambda x: np.broadcast_to(function(x), np.shape(x)).astype(float)
    return lambda x, t: np.broadcast_to(function(x, t), np.shape(x)).astype(float)


def _parse(name: str, text: str, alpha: float, symbols: Dict[str, sym.Symbol]):
    try:
        expression = sym.sympify(text, locals=dict(symbols))
    except (sym.SympifyError, SyntaxError, TypeError) as e:
        raise ConfigValidationError(f"Cannot parse {name} = {text!r}: {e}")
    expression = expression.subs(symbols["alpha"], alpha)
    unknown = expression.free_symbols - {symbols["x"], symbols["t"]}
    if unknown:
        raise ConfigValidationError(f"{name} uses unknown symbols {sorted(str(s) for s in unknown)}")
    return expression


def load_problem_spec(path: Union[str, Path], alpha: float) -> ProblemSpec:
    """
    Build a ProblemSpec from a key=value file.

    Required keys: f, phi, psi. Optional: exact, L, T. Expressions may use x, t,
    alpha and pi; phi and psi may only depend on x.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigValidationError(f"Problem spec {path} does not exist")
    values = {key.lower(): value for key, value in dotenv_values(path).items() if value is not None}
    missing = [key for key in ("f", "phi", "psi") if key not in values]
    if missing:
        raise ConfigValidationError(f"Problem spec {path} is missing {', '.join(missing)}")

    derive_sigma(alpha)
    symbols = {"x": sym.Symbol("x"), "t": sym.Symbol("t"), "alpha": sym.Symbol("alpha")}
    modules = [{"gamma": gamma}, "numpy"]

    def space_time(key: str) -> Callable:
        expression = _parse(key, values[key], alpha, symbols)
        return _as_field(sym.lambdify((symbols["x"], symbols["t"]), expression, modules), 2)

    def space_only(key: str) -> Callable:
        expression = _parse(key, values[key], alpha, symbols)
        if symbols["t"] in expression.free_symbols:
            raise ConfigValidationError(f"{key} must not depend on t")
        return _as_field(sym.lambdify(symbols["x"], expression, modules), 1)

    try:
        L = float(values.get("l", 1.0))
        T = float(values.get("t", 1.0))
    except ValueError as e:
        raise ConfigValidationError(f"L and T must be numbers: {e}")

    exact: Optional[Callable] = space_time("exact") if "exact" in values else None
    logger.info(f"Loaded problem spec {path.name} (exact solution {'given' if exact else 'absent'})")
    return ProblemSpec(
        source=space_time("f"),
        initial_value=space_only("phi"),
        initial_velocity=space_only("psi"),
        alpha=alpha,
        L=L,
        T=T,
        exact=exact,
        name=path.stem,
    )


def resolve_problem(example: str, alpha: float) -> ProblemSpec:
    """A built-in id or a path to a spec file."""
    if example in BUILTIN_PROBLEMS:
        return BUILTIN_PROBLEMS[example](alpha)
    return load_problem_spec(example, alpha)
