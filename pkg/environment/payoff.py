import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, Iterable, Mapping, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from utils.errors import LevelSolveError, PayoffConfigError, PayoffDomainError

DOMAIN_SLACK = 1e-12
ROOT_XTOL = 1e-13
ROOT_MAXITER = 200
LEVEL_RESIDUAL_TOL = 1e-11
MIN_CUSTOM_SAMPLES = 101


class InverseRange(str, Enum):
    BELOW = "below-range"
    WITHIN = "within"
    ABOVE = "above-range"


@dataclass(frozen=True)
class SaturatedInverse:
    value: float
    flag: InverseRange


def _check_domain(y: float) -> float:
    y = float(y)
    if not (-DOMAIN_SLACK <= y <= 1.0 + DOMAIN_SLACK):
        raise PayoffDomainError(f"Payoff argument {y!r} outside [0, 1]")
    return min(max(y, 0.0), 1.0)


class PayoffFunction(ABC):
    """Strictly concave cumulative payoff p on [0, 1] with density u = p'"""

    family: ClassVar[str] = ""

    def cumulative(self, y: float) -> float:
        return self._cumulative(_check_domain(y))

    def density(self, y: float) -> float:
        return self._density(_check_domain(y))

    def inverse_density(self, v: float) -> SaturatedInverse:
        v = float(v)
        if v > self._density(0.0):
            return SaturatedInverse(0.0, InverseRange.BELOW)
        if v < self._density(1.0):
            return SaturatedInverse(1.0, InverseRange.ABOVE)
        y = self._inverse(v)
        return SaturatedInverse(min(max(y, 0.0), 1.0), InverseRange.WITHIN)

    @property
    @abstractmethod
    def max_slope(self) -> float:
        """sup over [0, 1] of |u'|"""

    @abstractmethod
    def to_dict(self) -> dict: ...

    @abstractmethod
    def _cumulative(self, y: float) -> float: ...

    @abstractmethod
    def _density(self, y: float) -> float: ...

    @abstractmethod
    def _inverse(self, v: float) -> float: ...


@dataclass(frozen=True)
class QuadraticPayoff(PayoffFunction):
    """p(y) = -(c/2) y^2 - a y"""

    a: float = 0.0
    c: float = 1.0
    family: ClassVar[str] = "quadratic"

    def __post_init__(self) -> None:
        if not math.isfinite(self.a):
            raise PayoffConfigError(f"quadratic offset a must be finite, got {self.a}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise PayoffConfigError(f"quadratic curvature c must be positive, got {self.c}")

    @property
    def max_slope(self) -> float:
        return self.c

    def to_dict(self) -> dict:
        return {"type": self.family, "a": self.a, "c": self.c}

    def _cumulative(self, y: float) -> float:
        return -0.5 * self.c * y * y - self.a * y

    def _density(self, y: float) -> float:
        return -self.c * y - self.a

    def _inverse(self, v: float) -> float:
        return (-v - self.a) / self.c


@dataclass(frozen=True)
class LogPayoff(PayoffFunction):
    """p(y) = w ln(y + s)"""

    w: float = 1.0
    s: float = 1.0
    family: ClassVar[str] = "log"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.w) and self.w > 0):
            raise PayoffConfigError(f"log weight w must be positive, got {self.w}")
        if not (math.isfinite(self.s) and self.s > 0):
            raise PayoffConfigError(f"log shift s must be positive, got {self.s}")

    @property
    def max_slope(self) -> float:
        return self.w / (self.s * self.s)

    def to_dict(self) -> dict:
        return {"type": self.family, "w": self.w, "s": self.s}

    def _cumulative(self, y: float) -> float:
        return self.w * math.log(y + self.s)

    def _density(self, y: float) -> float:
        return self.w / (y + self.s)

    def _inverse(self, v: float) -> float:
        return self.w / v - self.s


@dataclass(frozen=True, eq=False)
class CustomPayoff(PayoffFunction):
    """Piecewise-linear density sampled on a uniform grid over [0, 1].

    The cumulative payoff integrates the interpolant exactly, with p(0) = 0.
    """

    samples: Tuple[float, ...] = ()
    family: ClassVar[str] = "custom"
    _grid: np.ndarray = field(init=False, repr=False)
    _values: np.ndarray = field(init=False, repr=False)
    _areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.samples, dtype=float)
        if values.ndim != 1 or values.size < MIN_CUSTOM_SAMPLES:
            raise PayoffConfigError(
                f"custom density needs at least {MIN_CUSTOM_SAMPLES} samples, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise PayoffConfigError("custom density has non-finite samples")
        steps = np.diff(values)
        if np.any(steps >= 0.0):
            k = int(np.argmax(steps >= 0.0))
            raise PayoffConfigError(
                f"custom density must be strictly decreasing; samples {k} and {k + 1} are not"
            )
        grid = np.linspace(0.0, 1.0, values.size)
        object.__setattr__(self, "samples", tuple(float(v) for v in values))
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_values", values)
        areas = integrate.cumulative_trapezoid(values, grid, initial=0.0)
        object.__setattr__(self, "_areas", areas)

    @property
    def max_slope(self) -> float:
        return float(np.max(-np.diff(self._values)) * (self._values.size - 1))

    def to_dict(self) -> dict:
        return {"type": self.family, "density": list(self.samples)}

    def _cell(self, y: float) -> int:
        k = int(np.searchsorted(self._grid, y, side="right")) - 1
        return min(max(k, 0), self._grid.size - 2)

    def _cumulative(self, y: float) -> float:
        k = self._cell(y)
        partial = (y - self._grid[k]) * (self._values[k] + self._density(y)) / 2.0
        return float(self._areas[k] + partial)

    def _density(self, y: float) -> float:
        return float(np.interp(y, self._grid, self._values))

    def _inverse(self, v: float) -> float:
        if v == self._values[0]:
            return 0.0
        if v == self._values[-1]:
            return 1.0
        return float(
            optimize.bisect(
                lambda y: self._density(y) - v, 0.0, 1.0, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER
            )
        )


def payoff_from_spec(spec: Mapping, where: str = "payoff") -> PayoffFunction:
    """Build a payoff function from its scenario object"""
    if not isinstance(spec, Mapping):
        raise PayoffConfigError(f"{where}: expected an object, got {type(spec).__name__}")
    kind = spec.get("type")
    try:
        if kind == QuadraticPayoff.family:
            _reject_unknown(spec, {"type", "a", "c"})
            return QuadraticPayoff(a=float(spec.get("a", 0.0)), c=float(spec.get("c", 1.0)))
        if kind == LogPayoff.family:
            _reject_unknown(spec, {"type", "w", "s"})
            return LogPayoff(w=float(spec["w"]), s=float(spec["s"]))
        if kind == CustomPayoff.family:
            _reject_unknown(spec, {"type", "density"})
            return CustomPayoff(samples=tuple(float(v) for v in spec["density"]))
    except PayoffConfigError as e:
        raise PayoffConfigError(f"{where}: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise PayoffConfigError(f"{where}: invalid {kind} parameters ({e})") from e
    raise PayoffConfigError(f"{where}.type: unknown payoff type {kind!r}")


def _reject_unknown(spec: Mapping, allowed: set) -> None:
    extra = sorted(set(spec) - allowed)
    if extra:
        raise PayoffConfigError(f"unexpected keys {extra}")


@dataclass(frozen=True)
class PayoffProfile:
    """Node-aligned payoff functions"""

    functions: Tuple[PayoffFunction, ...]

    def __post_init__(self) -> None:
        functions = tuple(self.functions)
        if not functions:
            raise PayoffConfigError("payoff profile is empty")
        object.__setattr__(self, "functions", functions)

    @classmethod
    def quadratic(cls, a: Sequence[float], c: float = 1.0) -> "PayoffProfile":
        return cls(tuple(QuadraticPayoff(a=float(ai), c=c) for ai in a))

    @classmethod
    def from_specs(cls, specs: Iterable[Mapping]) -> "PayoffProfile":
        return cls(tuple(payoff_from_spec(s, f"payoffs[{k}]") for k, s in enumerate(specs)))

    def __len__(self) -> int:
        return len(self.functions)

    @property
    def node_count(self) -> int:
        return len(self.functions)

    @property
    def max_slope(self) -> float:
        return max(f.max_slope for f in self.functions)

    def cumulative(self, i: int, y: float) -> float:
        return self.functions[i].cumulative(y)

    def density(self, i: int, y: float) -> float:
        return self.functions[i].density(y)

    def inverse_density(self, i: int, v: float) -> SaturatedInverse:
        return self.functions[i].inverse_density(v)

    def densities(self, x: Sequence[float]) -> np.ndarray:
        return np.array([f.density(y) for f, y in zip(self.functions, x)], dtype=float)

    def level_solve(self, nodes: Iterable[int], mass: float) -> float:
        """Common level eta with sum over nodes of clamped u_j^{-1}(eta) equal to mass"""
        members = sorted(set(nodes))
        if not members:
            raise ValueError("level_solve needs a nonempty node set")
        mass = float(mass)
        if not (-LEVEL_RESIDUAL_TOL <= mass <= len(members) + LEVEL_RESIDUAL_TOL):
            raise LevelSolveError(f"Mass {mass} cannot be spread over {len(members)} nodes")

        if len(members) == 1:
            return self.density(members[0], min(max(mass, 0.0), 1.0))

        def excess(eta: float) -> float:
            return sum(self.inverse_density(j, eta).value for j in members) - mass

        lo = min(self.density(j, 1.0) for j in members)
        hi = max(self.density(j, 0.0) for j in members)
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo < -LEVEL_RESIDUAL_TOL or f_hi > LEVEL_RESIDUAL_TOL:
            raise LevelSolveError(
                f"No sign change on [{lo}, {hi}] for mass {mass} over nodes {members}"
            )
        if f_lo <= 0.0:
            return lo
        if f_hi >= 0.0:
            return hi
        try:
            return float(
                optimize.bisect(excess, lo, hi, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER)
            )
        except (RuntimeError, ValueError) as e:
            raise LevelSolveError(f"Level bisection failed for nodes {members}: {e}") from e

    def social_utility(self, x: Sequence[float]) -> float:
        return float(
            sum(f.cumulative(y) - f.cumulative(0.0) for f, y in zip(self.functions, x))
        )

    def to_list(self) -> list:
        return [f.to_dict() for f in self.functions]
