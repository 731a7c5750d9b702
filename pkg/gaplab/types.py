"""Type definitions for gaplab experiment rows and exact models."""

from typing import Optional, Protocol, TypedDict, Union

Number = Union[int, float]


class GapRow(TypedDict):
    """One row of a gap table; ``n`` is ``"summary"`` on rate-fit rows."""
    n: Union[Number, str]
    model: str
    x_star: float
    variant: str
    staffing: Number
    cost_prescribed: float
    staffing_optimal: Number
    cost_optimal: float
    gap: float
    normalized_gap: float
    flags: str


class ApproxRow(TypedDict):
    """One row of an expansion-accuracy check."""
    n: Union[Number, str]
    x: float
    exact_EQ: float
    leading: float
    correction: float
    residual: float
    flags: str


class ConstrainedRow(TypedDict):
    """One row of the constrained-staffing report."""
    n: Number
    alpha: float
    x_star: float
    staffing_sqrt: int
    staffing_exact: int
    server_gap: int


class ExactModel(Protocol):
    """Exact cost evaluator for a sequence of systems indexed by the arrival scale n."""

    integer_only: bool

    def expected_queue(self, n: float, staffing: Number) -> float: ...

    def cost(self, n: float, staffing: Number) -> float: ...

    def optimal(self, n: float, center: Optional[Number] = None): ...
