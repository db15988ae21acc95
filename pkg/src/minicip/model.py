"""Problem data: variables, linear rows, nonlinear rows over a shared DAG."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Sequence

from .expr import DomainError, ExprDag, evaluate

INF = math.inf
FEASTOL = 1e-6


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    integer: bool = False

    @property
    def binary(self) -> bool:
        return self.integer and self.lb >= 0.0 and self.ub <= 1.0


@dataclass
class LinearRow:
    name: str
    coeffs: dict[int, float]
    lhs: float = -INF
    rhs: float = INF

    def activity(self, x: Sequence[float]) -> float:
        return sum(a * x[j] for j, a in self.coeffs.items())


@dataclass
class NonlinearRow:
    name: str
    root: int
    lhs: float = -INF
    rhs: float = INF


@dataclass
class Instance:
    """``min/max c.x + offset`` over linear and nonlinear ranged rows."""

    variables: list[Variable] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    obj_offset: float = 0.0
    sense: str = "min"
    linear: list[LinearRow] = field(default_factory=list)
    nonlinear: list[NonlinearRow] = field(default_factory=list)
    dag: ExprDag = field(default_factory=ExprDag)
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        for j, v in enumerate(self.variables):
            if v.name == name:
                return j
        raise KeyError(name)

    def name_map(self) -> dict[str, int]:
        return {v.name: j for j, v in enumerate(self.variables)}

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, integer: bool = False) -> int:
        self.variables.append(Variable(name, float(lb), float(ub), integer))
        return len(self.variables) - 1

    def add_linear(self, coeffs: dict[int, float], lhs: float = -INF, rhs: float = INF,
                   name: str | None = None) -> int:
        self.linear.append(LinearRow(name or f"c{len(self.linear) + 1}",
                                     {j: float(a) for j, a in coeffs.items()}, float(lhs), float(rhs)))
        return len(self.linear) - 1

    def add_nonlinear(self, root: int, lhs: float = -INF, rhs: float = INF,
                      name: str | None = None) -> int:
        self.nonlinear.append(NonlinearRow(name or f"n{len(self.nonlinear) + 1}", root,
                                           float(lhs), float(rhs)))
        return len(self.nonlinear) - 1

    @property
    def is_linear(self) -> bool:
        return not self.nonlinear

    def min_costs(self) -> list[float]:
        """Objective coefficients of the equivalent minimisation."""
        sign = 1.0 if self.sense == "min" else -1.0
        c = [0.0] * self.n
        for j, a in self.objective.items():
            c[j] = sign * a
        return c

    def objective_value(self, x: Sequence[float]) -> float:
        return self.obj_offset + sum(a * x[j] for j, a in self.objective.items())

    def copy(self) -> "Instance":
        return copy.deepcopy(self)

    def violations(self, x: Sequence[float]) -> dict[str, float]:
        """Violation of every original row, bound and integrality requirement."""
        out: dict[str, float] = {}
        for row in self.linear:
            v = row.activity(x)
            out[row.name] = max(row.lhs - v, v - row.rhs, 0.0)
        for row in self.nonlinear:
            try:
                v = evaluate(self.dag, row.root, x)
            except (DomainError, OverflowError, ZeroDivisionError):
                out[row.name] = INF
                continue
            out[row.name] = max(row.lhs - v, v - row.rhs, 0.0)
        for j, var in enumerate(self.variables):
            xj = x[j]
            viol = max(var.lb - xj, xj - var.ub, 0.0)
            if var.integer:
                viol = max(viol, abs(xj - round(xj)))
            if viol > 0.0:
                out[f"bound:{var.name}"] = viol
        return out
