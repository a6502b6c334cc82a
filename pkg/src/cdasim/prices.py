"""Tick-grid price arithmetic.

Every price the simulator stores or logs is an integer count of ticks.
Conversion from real-valued intermediate quantities happens exactly once
per returned value; internal real-valued state (e.g. the continuous
mean-reverting process) is never rounded, so no rounding bias accumulates.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, ROUND_HALF_UP, Decimal


@dataclass(frozen=True)
class PriceGrid:
    """Maps between real-valued prices and integer tick counts."""

    tick_size: float = 0.1

    def __post_init__(self) -> None:
        if self.tick_size <= 0:
            raise ValueError("tick_size must be positive")

    def _ratio(self, value: float) -> Decimal:
        # Decimal(str(...)) uses the shortest decimal repr of the float,
        # which keeps quantities like 99.55 / 0.01 exactly on-grid.
        return Decimal(str(value)) / Decimal(str(self.tick_size))

    def to_ticks(self, value: float) -> int:
        """Nearest tick, ties rounded away from zero."""
        return int(self._ratio(value).to_integral_value(rounding=ROUND_HALF_UP))

    def to_ticks_down(self, value: float) -> int:
        return int(self._ratio(value).to_integral_value(rounding=ROUND_FLOOR))

    def to_ticks_up(self, value: float) -> int:
        return int(self._ratio(value).to_integral_value(rounding=ROUND_CEILING))

    def to_value(self, ticks: int) -> float:
        return ticks * self.tick_size

    @property
    def decimals(self) -> int:
        exponent = Decimal(str(self.tick_size)).normalize().as_tuple().exponent
        return max(0, -int(exponent))

    def format(self, ticks: int) -> str:
        """Exact decimal rendering for CSV output (bit-stable across runs)."""
        return f"{Decimal(ticks) * Decimal(str(self.tick_size)):.{self.decimals}f}"
