"""Exogenous fundamental value series.

One series per equity, predetermined and unaffected by agent activity.
Three generated variants plus a file-backed one:

* discrete mean reverting:  r_t = max{0, kappa*r_bar + (1-kappa)*r_{t-1} + u_t}
* Ornstein-Uhlenbeck, sampled sparsely (skip-ahead) via the exact
  conditional distribution of the process
* OU with Poisson-arriving "megashock" jumps from a zero-mean bimodal
  Gaussian mixture
* step-interpolated historical data loaded from a two-column file

The sparse variants accept queries in nondecreasing time order only; the
discrete variant memoizes its prefix so repeated queries are cheap.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field

from .prices import PriceGrid
from .rng import child_stream

FUNDAMENTAL_STREAM = "fundamental"
MEGASHOCK_ARRIVALS_STREAM = "megashock-arrivals"
MEGASHOCK_SIZES_STREAM = "megashock-sizes"


@dataclass(frozen=True)
class DmrParams:
    """Discrete mean reverting series parameters (values in currency units)."""

    r_bar: float
    kappa: float
    sigma_s_sq: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        if self.sigma_s_sq < 0.0:
            raise ValueError("sigma_s_sq must be >= 0")
        if self.r_bar < 0.0:
            raise ValueError("r_bar must be >= 0")


@dataclass(frozen=True)
class OuParams:
    """Ornstein-Uhlenbeck parameters (per unit simulation step)."""

    mu: float
    gamma: float
    sigma_sq: float
    q0: float

    def __post_init__(self) -> None:
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")
        if self.sigma_sq < 0.0:
            raise ValueError("sigma_sq must be >= 0")


@dataclass(frozen=True)
class MegashockParams:
    ou: OuParams
    arrival_rate: float
    shock_mean: float
    shock_var: float

    def __post_init__(self) -> None:
        if self.arrival_rate <= 0.0:
            raise ValueError("arrival_rate must be > 0")
        if self.shock_mean <= 0.0:
            raise ValueError("shock_mean must be > 0")
        if self.shock_var <= 0.0:
            raise ValueError("shock_var must be > 0")
        if self.shock_var <= self.ou.sigma_sq:
            # Recommended configuration, not a hard constraint.
            warnings.warn(
                "shock_var should exceed the OU base variance sigma_sq",
                stacklevel=2,
            )


def dmr_step(prev: int, params: DmrParams, noise_draw: float, grid: PriceGrid) -> int:
    """One reversion step from tick price ``prev``; floored at zero."""
    nxt = params.kappa * params.r_bar + (1.0 - params.kappa) * grid.to_value(prev)
    nxt += noise_draw
    return max(0, grid.to_ticks(max(0.0, nxt)))


def ou_mean_var(q_prev: float, elapsed: float, params: OuParams) -> tuple[float, float]:
    """Exact conditional mean and variance of the OU value after ``elapsed``."""
    if elapsed <= 0.0:
        raise ValueError("elapsed must be > 0")
    decay = math.exp(-params.gamma * elapsed)
    mean = params.mu + (q_prev - params.mu) * decay
    var = params.sigma_sq / (2.0 * params.gamma) * (1.0 - decay * decay)
    return mean, var


def ou_sample(
    q_prev: float,
    elapsed: float,
    params: OuParams,
    std_normal_draw: float,
    grid: PriceGrid,
) -> int:
    """Skip-ahead sample of the OU value, rounded to tick and floored at zero."""
    mean, var = ou_mean_var(q_prev, elapsed, params)
    return max(0, grid.to_ticks(mean + math.sqrt(var) * std_normal_draw))


@dataclass
class DmrFundamental:
    """Memoizing discrete mean reverting source; r_0 = r_bar exactly.

    ``r0_override`` is a test hook for starting away from the mean (used to
    check the geometric contraction rate); production configs leave it None.
    """

    params: DmrParams
    grid: PriceGrid
    seed: int
    horizon_T: int
    r0_override: float | None = None

    variant = "dmr"

    def __post_init__(self) -> None:
        self._rng = child_stream(self.seed, FUNDAMENTAL_STREAM)
        r0 = self.params.r_bar if self.r0_override is None else self.r0_override
        self._values: list[int] = [self.grid.to_ticks(r0)]
        self._sigma_s = math.sqrt(self.params.sigma_s_sq)

    def value_at(self, t: int) -> int:
        if t > self.horizon_T:
            raise ValueError(f"t={t} beyond horizon T={self.horizon_T}")
        if t < 0:
            raise ValueError("t must be >= 0")
        while len(self._values) <= t:
            noise = self._rng.normal(0.0, self._sigma_s)
            self._values.append(dmr_step(self._values[-1], self.params, noise, self.grid))
        return self._values[t]

    def evaluations(self) -> list[tuple[int, int]]:
        return list(enumerate(self._values))


@dataclass
class OuFundamental:
    """Sparse OU source; queries must arrive in nondecreasing time order.

    Internal state is kept in real arithmetic; rounding to tick happens only
    on return.
    """

    params: OuParams
    grid: PriceGrid
    seed: int
    horizon_T: int

    variant = "ou"

    def __post_init__(self) -> None:
        self._rng = child_stream(self.seed, FUNDAMENTAL_STREAM)
        self._state = self.params.q0
        self._last_t = 0
        self._trace: list[tuple[int, int]] = [(0, max(0, self.grid.to_ticks(self._state)))]

    def value_at(self, t: int) -> int:
        if t > self.horizon_T:
            raise ValueError(f"t={t} beyond horizon T={self.horizon_T}")
        if t < self._last_t:
            raise ValueError(f"queries must be nondecreasing (got {t} after {self._last_t})")
        if t > self._last_t:
            mean, var = ou_mean_var(self._state, t - self._last_t, self.params)
            self._state = mean + math.sqrt(var) * self._rng.standard_normal()
            self._last_t = t
            self._trace.append((t, max(0, self.grid.to_ticks(self._state))))
        return self._trace[-1][1]

    def evaluations(self) -> list[tuple[int, int]]:
        return list(self._trace)


@dataclass
class MegashockFundamental:
    """OU source with Poisson-arriving bimodal jumps layered on top.

    Arrivals occur at real-valued times; each shock is applied as an
    instantaneous additive offset to the OU state (the shifted state then
    keeps reverting toward the mean).  Arrivals falling in (last_query, t]
    are processed when t is queried.  Draw order per shock: one uniform
    selects the lobe, then one normal from the sizes stream gives the jump.
    """

    params: MegashockParams
    grid: PriceGrid
    seed: int
    horizon_T: int

    variant = "megashock"

    def __post_init__(self) -> None:
        self._rng = child_stream(self.seed, FUNDAMENTAL_STREAM)
        self._arrivals = child_stream(self.seed, MEGASHOCK_ARRIVALS_STREAM)
        self._sizes = child_stream(self.seed, MEGASHOCK_SIZES_STREAM)
        self._state = self.params.ou.q0
        self._clock = 0.0  # real time of the OU state
        self._last_query = 0
        self._next_arrival = self._arrivals.exponential(1.0 / self.params.arrival_rate)
        self._trace: list[tuple[int, int]] = [(0, max(0, self.grid.to_ticks(self._state)))]

    def _advance_to(self, when: float) -> None:
        if when > self._clock:
            mean, var = ou_mean_var(self._state, when - self._clock, self.params.ou)
            self._state = mean + math.sqrt(var) * self._rng.standard_normal()
            self._clock = when

    def _draw_shock(self) -> float:
        sign = 1.0 if self._sizes.random() < 0.5 else -1.0
        return self._sizes.normal(sign * self.params.shock_mean, math.sqrt(self.params.shock_var))

    def value_at(self, t: int) -> int:
        if t > self.horizon_T:
            raise ValueError(f"t={t} beyond horizon T={self.horizon_T}")
        if t < self._last_query:
            raise ValueError(f"queries must be nondecreasing (got {t} after {self._last_query})")
        if t > self._last_query:
            while self._next_arrival <= t:
                self._advance_to(self._next_arrival)
                self._state = max(0.0, self._state + self._draw_shock())
                self._next_arrival += self._arrivals.exponential(1.0 / self.params.arrival_rate)
            self._advance_to(float(t))
            self._last_query = t
            self._trace.append((t, max(0, self.grid.to_ticks(self._state))))
        return self._trace[-1][1]

    def evaluations(self) -> list[tuple[int, int]]:
        return list(self._trace)


def file_value_at(t: int, series: list[tuple[int, int]]) -> int:
    """Step interpolation: value at the greatest table timestamp <= t."""
    if not series:
        raise ValueError("fundamental series is empty")
    if t < series[0][0]:
        raise ValueError(f"t={t} precedes first timestamp {series[0][0]}")
    idx = bisect_right(series, t, key=lambda row: row[0]) - 1
    return series[idx][1]


@dataclass
class FileFundamental:
    """Historical series loaded from delimited text (``timestamp,value``)."""

    series: list[tuple[int, int]]
    grid: PriceGrid
    _trace: list[tuple[int, int]] = field(default_factory=list)

    variant = "file"

    @classmethod
    def from_text(cls, text: str, grid: PriceGrid) -> "FileFundamental":
        series: list[tuple[int, int]] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if lineno == 1 and not _is_number(parts[0]):
                continue  # optional header
            if len(parts) != 2 or not _is_number(parts[0]) or not _is_number(parts[1]):
                raise ValueError(f"malformed fundamental file at line {lineno}: {raw!r}")
            ts = int(float(parts[0]))
            if float(parts[0]) != ts:
                raise ValueError(f"malformed fundamental file at line {lineno}: "
                                 f"timestamp must be an integer")
            value = grid.to_ticks(float(parts[1]))
            if series and ts <= series[-1][0]:
                raise ValueError(f"malformed fundamental file at line {lineno}: "
                                 f"timestamps must be strictly increasing")
            series.append((ts, value))
        if not series:
            raise ValueError("fundamental file contains no data rows")
        return cls(series=series, grid=grid)

    @classmethod
    def from_path(cls, path: str, grid: PriceGrid) -> "FileFundamental":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), grid)

    def value_at(self, t: int) -> int:
        value = file_value_at(t, self.series)
        if not self._trace or self._trace[-1][0] != t:
            self._trace.append((t, value))
        return value

    def evaluations(self) -> list[tuple[int, int]]:
        return list(self._trace)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def dump_series(source, path: str, grid: PriceGrid) -> None:
    """Write the evaluated series in the same two-column format we load."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,value\n")
        for t, ticks in source.evaluations():
            fh.write(f"{t},{grid.format(ticks)}\n")
