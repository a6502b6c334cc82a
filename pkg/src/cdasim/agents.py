"""Trading strategies: Zero Intelligence and Heuristic Belief Learning.

Both strategies are pure decision functions over (holdings, preferences,
fundamental projection, market view, RNG stream).  ZI picks a side by fair
coin, shades its limit away from its valuation by a randomly requested
surplus, and may instead take the touch when that locks in at least a
configured fraction of the requested surplus.  HBL replaces the random
shading with the price maximizing expected surplus under a success-belief
function fit to the recently observed order stream, falling back to ZI
while it has not yet observed enough transactions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .orderbook import BookEvent, EventKind, Side
from .preferences import PrivateValues
from .prices import PriceGrid


class ActionKind(enum.Enum):
    PLACE = "PLACE"
    TAKE = "TAKE"  # marketable limit at the touch, executes immediately
    SKIP = "SKIP"


@dataclass(frozen=True)
class AgentAction:
    kind: ActionKind
    side: Side | None = None
    limit_price: int | None = None  # ticks


SKIP = AgentAction(ActionKind.SKIP)


@dataclass(frozen=True)
class ZiParams:
    r_min: float
    r_max: float
    eta: float
    sigma_n_sq: float
    q_max: int
    sigma_pv_sq: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.r_min <= self.r_max:
            raise ValueError("require 0 <= r_min <= r_max")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.sigma_n_sq < 0.0 or self.sigma_pv_sq < 0.0:
            raise ValueError("variances must be >= 0")
        if self.q_max < 1:
            raise ValueError("q_max must be >= 1")


@dataclass(frozen=True)
class HblParams:
    zi: ZiParams
    memory_length: int  # transactions remembered (L)
    grace_period: int  # steps an order may rest before counting as rejected
    success_mode: str = "binary"  # or "fractional"
    grid_mode: str = "observed"  # or "spline"

    def __post_init__(self) -> None:
        if self.memory_length < 1:
            raise ValueError("memory_length must be >= 1")
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if self.success_mode not in ("binary", "fractional"):
            raise ValueError("success_mode must be 'binary' or 'fractional'")
        if self.grid_mode not in ("observed", "spline"):
            raise ValueError("grid_mode must be 'observed' or 'spline'")


def _choose_side(q_held: int, pv: PrivateValues, rng: np.random.Generator) -> Side | None:
    """Fair coin, flipping to the only legal side at the holdings limit."""
    side = Side.BID if rng.random() < 0.5 else Side.ASK
    if side is Side.BID and not pv.can_buy(q_held):
        side = Side.ASK if pv.can_sell(q_held) else None
    elif side is Side.ASK and not pv.can_sell(q_held):
        side = Side.BID if pv.can_buy(q_held) else None
    return side


def zi_decide(
    q_held: int,
    pv: PrivateValues,
    r_hat: float,
    best_bid: int | None,
    best_ask: int | None,
    params: ZiParams,
    rng: np.random.Generator,
    grid: PriceGrid,
) -> AgentAction:
    side = _choose_side(q_held, pv, rng)
    if side is None:
        return SKIP
    requested = rng.uniform(params.r_min, params.r_max)
    if side is Side.BID:
        valuation = pv.buy_valuation(q_held, r_hat)
        # Strategic threshold: lock in eta * R immediately if the touch allows it.
        if best_ask is not None and valuation - grid.to_value(best_ask) >= params.eta * requested:
            return AgentAction(ActionKind.TAKE, Side.BID, best_ask)
        limit = max(0, grid.to_ticks_down(valuation - requested))
        return AgentAction(ActionKind.PLACE, Side.BID, limit)
    valuation = pv.sell_valuation(q_held, r_hat)
    if best_bid is not None and grid.to_value(best_bid) - valuation >= params.eta * requested:
        return AgentAction(ActionKind.TAKE, Side.ASK, best_bid)
    limit = max(0, grid.to_ticks_up(valuation + requested))
    return AgentAction(ActionKind.PLACE, Side.ASK, limit)


@dataclass(frozen=True)
class MemoryOrder:
    side: Side
    price: int
    success: float  # weight in [0, 1]
    failure: float  # weight in [0, 1]; success + failure may be < 1 while pending


class HblMemory:
    """Classified order history with prefix sums for fast belief queries."""

    def __init__(self, records: tuple[MemoryOrder, ...], transaction_count: int):
        self._records = records
        self.transaction_count = transaction_count
        is_bid = np.fromiter((r.side is Side.BID for r in records), dtype=bool,
                             count=len(records))
        prices = np.fromiter((r.price for r in records), dtype=np.int64,
                             count=len(records))
        success = np.fromiter((r.success for r in records), dtype=np.float64,
                              count=len(records))
        failure = np.fromiter((r.failure for r in records), dtype=np.float64,
                              count=len(records))
        self._build(is_bid, prices, success, failure)

    @classmethod
    def from_arrays(cls, is_bid, prices, success, failure,
                    transaction_count: int) -> "HblMemory":
        """Construct directly from parallel arrays, skipping record objects."""
        memory = cls.__new__(cls)
        memory._records = None
        memory.transaction_count = transaction_count
        memory._build(np.asarray(is_bid, dtype=bool),
                      np.asarray(prices, dtype=np.int64),
                      np.asarray(success, dtype=np.float64),
                      np.asarray(failure, dtype=np.float64))
        return memory

    @property
    def records(self) -> tuple[MemoryOrder, ...]:
        if self._records is None:
            # rebuilt from the arrays on demand; order is bids-then-asks by price
            self._records = tuple(
                [MemoryOrder(Side.BID, int(p), float(s), float(f))
                 for p, s, f in zip(self._bid_prices_sorted, self._bid_succ,
                                    self._bid_fail)]
                + [MemoryOrder(Side.ASK, int(p), float(s), float(f))
                   for p, s, f in zip(self._ask_prices, self._ask_succ,
                                      self._ask_fail)]
            )
        return self._records

    def _build(self, is_bid, prices, success, failure) -> None:
        self._count = len(prices)
        bid_order = np.argsort(prices[is_bid], kind="stable")
        ask_mask = ~is_bid
        ask_order = np.argsort(prices[ask_mask], kind="stable")
        # BID-side query ingredients
        self._bid_prices_sorted = prices[is_bid][bid_order]
        self._ask_prices = prices[ask_mask][ask_order]
        self._bid_succ = success[is_bid][bid_order]
        self._bid_fail = failure[is_bid][bid_order]
        self._bid_succ_prefix = np.concatenate(([0.0], np.cumsum(self._bid_succ)))
        self._bid_fail_suffix = np.concatenate(([0.0], np.cumsum(self._bid_fail[::-1])))
        # ASK-side (mirrored) query ingredients
        self._ask_succ = success[ask_mask][ask_order]
        self._ask_fail = failure[ask_mask][ask_order]
        self._ask_succ_suffix = np.concatenate(([0.0], np.cumsum(self._ask_succ[::-1])))
        self._ask_fail_prefix = np.concatenate(([0.0], np.cumsum(self._ask_fail)))

    def __len__(self) -> int:
        return self._count

    @property
    def prices(self) -> list[int]:
        merged = np.union1d(self._bid_prices_sorted, self._ask_prices)
        return [int(p) for p in merged]

    def bid_components(self, p: int) -> tuple[float, float, float]:
        """(asks at <= p, successful-bid weight at <= p, failed-bid weight at >= p)."""
        asks_le = np.searchsorted(self._ask_prices, p, side="right")
        n_le = np.searchsorted(self._bid_prices_sorted, p, side="right")
        succ_le = self._bid_succ_prefix[n_le]
        n_lt = np.searchsorted(self._bid_prices_sorted, p, side="left")
        fail_ge = self._bid_fail_suffix[len(self._bid_prices_sorted) - n_lt]
        return float(asks_le), float(succ_le), float(fail_ge)

    def ask_components(self, p: int) -> tuple[float, float, float]:
        """(bids at >= p, successful-ask weight at >= p, failed-ask weight at <= p)."""
        bids_ge = len(self._bid_prices_sorted) - np.searchsorted(
            self._bid_prices_sorted, p, side="left")
        n_lt = np.searchsorted(self._ask_prices, p, side="left")
        succ_ge = self._ask_succ_suffix[len(self._ask_prices) - n_lt]
        n_le = np.searchsorted(self._ask_prices, p, side="right")
        fail_le = self._ask_fail_prefix[n_le]
        return float(bids_ge), float(succ_ge), float(fail_le)

    def belief_array(self, prices, side: Side) -> np.ndarray:
        """Vectorized ``hbl_belief`` over an array of candidate prices."""
        p = np.asarray(prices, dtype=np.int64)
        if side is Side.BID:
            favorable = np.searchsorted(self._ask_prices, p, side="right").astype(float)
            succ = self._bid_succ_prefix[np.searchsorted(self._bid_prices_sorted, p,
                                                         side="right")]
            fail = self._bid_fail_suffix[len(self._bid_prices_sorted)
                                         - np.searchsorted(self._bid_prices_sorted, p,
                                                           side="left")]
        else:
            favorable = (len(self._bid_prices_sorted)
                         - np.searchsorted(self._bid_prices_sorted, p,
                                           side="left")).astype(float)
            succ = self._ask_succ_suffix[len(self._ask_prices)
                                         - np.searchsorted(self._ask_prices, p,
                                                           side="left")]
            fail = self._ask_fail_prefix[np.searchsorted(self._ask_prices, p,
                                                         side="right")]
        numerator = favorable + succ
        denominator = numerator + fail
        return np.divide(numerator, denominator,
                         out=np.zeros_like(numerator), where=denominator > 0.0)


def hbl_classify(events, now: int, params: HblParams) -> HblMemory:
    """Build the classified memory covering the last L observed transactions.

    The memory spans every order placed at or after the placement time of
    the oldest order involved in those transactions.  Binary mode scores an
    order 1/0 on whether any part of it executed (unexecuted orders count
    as failures only once they outlived the grace period or were
    cancelled); fractional mode ramps the weights linearly with the time
    the order sat in the book.
    """
    placed: dict[int, BookEvent] = {}
    exec_time: dict[int, int] = {}
    cancel_time: dict[int, int] = {}
    transactions: list[tuple[int, int]] = []  # (order_id, counterparty), time-ordered
    seen_pairs: set[tuple[int, int, int]] = set()
    for event in events:
        if event.kind is EventKind.PLACED:
            placed[event.order_id] = event
        elif event.kind is EventKind.EXECUTED:
            exec_time.setdefault(event.order_id, event.time)
            key = (event.time, min(event.order_id, event.counterparty),
                   max(event.order_id, event.counterparty))
            if key not in seen_pairs:
                seen_pairs.add(key)
                transactions.append((event.order_id, event.counterparty))
        elif event.kind is EventKind.CANCELLED:
            cancel_time[event.order_id] = event.time

    recent = transactions[-params.memory_length:]
    if not recent:
        return HblMemory((), transaction_count=0)
    involved = {oid for pair in recent for oid in pair}
    missing = involved - placed.keys()
    if missing:
        raise ValueError(f"malformed event stream: executions without placements {sorted(missing)}")
    window_start = min(placed[oid].time for oid in involved)

    grace = params.grace_period
    records = []
    for oid, event in placed.items():
        if event.time < window_start:
            continue
        weights = _classify_order(event.time, exec_time.get(oid), cancel_time.get(oid),
                                  now, grace, params.success_mode)
        if weights is None:
            continue
        success, failure = weights
        records.append(MemoryOrder(event.side, event.price, success, failure))
    return HblMemory(tuple(records), transaction_count=len(transactions))


def _classify_order(placed_at, executed_at, cancelled_at, now, grace, mode):
    if mode == "binary":
        if executed_at is not None:
            return 1.0, 0.0
        if cancelled_at is not None:
            return 0.0, 1.0
        if now - placed_at > grace:
            return 0.0, 1.0
        return None  # still pending within grace; contributes nothing
    # fractional
    if executed_at is not None:
        alive = executed_at - placed_at
        success = max(0.0, 1.0 - alive / grace)
        return success, 1.0 - success
    alive = (cancelled_at if cancelled_at is not None else now) - placed_at
    failure = min(1.0, alive / grace)
    if failure == 0.0:
        return None
    return 0.0, failure


class OrderHistory:
    """Incremental array-backed order ledger for fast memory construction.

    The simulation loop appends placements and marks outcomes as they
    happen, so building an agent's memory becomes a slice plus vectorized
    classification instead of a rescan of the raw event log.  Produces the
    same memories as ``hbl_classify`` over the matching event window.
    """

    _FIELDS = ("_placed", "_price", "_is_bid", "_executed", "_cancelled")

    def __init__(self) -> None:
        self._capacity = 256
        self._placed = np.empty(self._capacity, dtype=np.int64)
        self._price = np.empty(self._capacity, dtype=np.int64)
        self._is_bid = np.empty(self._capacity, dtype=bool)
        self._executed = np.empty(self._capacity, dtype=np.float64)
        self._cancelled = np.empty(self._capacity, dtype=np.float64)
        self._index: dict[int, int] = {}
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def _grow(self) -> None:
        self._capacity *= 2
        for name in self._FIELDS:
            old = getattr(self, name)
            grown = np.empty(self._capacity, dtype=old.dtype)
            grown[: self._n] = old[: self._n]
            setattr(self, name, grown)

    def add(self, order_id: int, side: Side, price: int, now: int) -> None:
        if self._n == self._capacity:
            self._grow()
        i = self._n
        self._placed[i] = now
        self._price[i] = price
        self._is_bid[i] = side is Side.BID
        self._executed[i] = np.nan
        self._cancelled[i] = np.nan
        self._index[order_id] = i
        self._n += 1

    def mark_executed(self, order_id: int, now: int) -> None:
        i = self._index[order_id]
        if np.isnan(self._executed[i]):  # keep the first execution time
            self._executed[i] = now

    def mark_cancelled(self, order_id: int, now: int) -> None:
        self._cancelled[self._index[order_id]] = now

    def memory(self, window_start: int, now: int, params: HblParams,
               transaction_count: int) -> HblMemory:
        """Classified memory of all orders placed at or after ``window_start``."""
        i0 = int(np.searchsorted(self._placed[: self._n], window_start, side="left"))
        placed = self._placed[i0: self._n]
        price = self._price[i0: self._n]
        is_bid = self._is_bid[i0: self._n]
        executed = self._executed[i0: self._n]
        cancelled = self._cancelled[i0: self._n]
        exec_mask = ~np.isnan(executed)
        grace = float(params.grace_period)
        if params.success_mode == "binary":
            failed = ~exec_mask & (~np.isnan(cancelled) | (now - placed > grace))
            include = exec_mask | failed
            success = exec_mask[include].astype(np.float64)
            failure = failed[include].astype(np.float64)
        else:
            success = np.zeros(len(placed))
            failure = np.zeros(len(placed))
            ramp = np.clip(1.0 - (executed - placed) / grace, 0.0, 1.0)
            success[exec_mask] = ramp[exec_mask]
            failure[exec_mask] = 1.0 - ramp[exec_mask]
            resolved_at = np.where(np.isnan(cancelled), float(now), cancelled)
            stale = np.clip((resolved_at - placed) / grace, 0.0, 1.0)
            failure[~exec_mask] = stale[~exec_mask]
            include = exec_mask | (failure > 0.0)
            success = success[include]
            failure = failure[include]
        return HblMemory.from_arrays(is_bid[include], price[include],
                                     success, failure, transaction_count)


def hbl_belief(memory: HblMemory, p: int, side: Side) -> float:
    """Heuristic probability that a limit order at price ``p`` transacts.

    For a bid: favorable mass is ask volume and successful bids at <= p,
    unfavorable mass is failed bids at >= p.  Mirrored for an ask.  Returns
    0 when the denominator is empty.
    """
    if side is Side.BID:
        favorable_volume, succ, fail = memory.bid_components(p)
    else:
        favorable_volume, succ, fail = memory.ask_components(p)
    numerator = favorable_volume + succ
    denominator = numerator + fail
    if denominator == 0.0:
        return 0.0
    return numerator / denominator


def hbl_candidate_grid(memory: HblMemory, mode: str = "observed", extend: int = 1) -> list[int]:
    """Candidate limit prices: observed distinct prices, or every tick across
    the observed range, each extended ``extend`` ticks beyond the extremes."""
    observed = memory.prices
    if not observed:
        return []
    lo = max(0, observed[0] - extend)
    hi = observed[-1] + extend
    if mode == "spline":
        return list(range(lo, hi + 1))
    grid = sorted(set(observed) | {lo, hi})
    return grid


def hbl_belief_spline(memory: HblMemory, side: Side):
    """Natural cubic spline through the observed (price, belief) points,
    clamped to [0, 1]; degenerates to the raw belief with < 2 points."""
    from scipy.interpolate import CubicSpline

    points = memory.prices
    if len(points) < 2:
        return lambda p: hbl_belief(memory, p, side)
    values = [hbl_belief(memory, p, side) for p in points]
    spline = CubicSpline(points, values, bc_type="natural")

    def belief(p: int) -> float:
        return min(1.0, max(0.0, float(spline(p))))

    return belief


def hbl_decide(
    q_held: int,
    pv: PrivateValues,
    r_hat: float,
    memory: HblMemory | None,
    candidate_prices: list[int],
    params: HblParams,
    rng: np.random.Generator,
    grid: PriceGrid,
    best_bid: int | None = None,
    best_ask: int | None = None,
) -> AgentAction:
    """Expected-surplus-maximizing placement; ZI fallback while uninformed.

    The fallback is checked before any draw so that an uninformed HBL agent
    consumes its RNG stream exactly like a ZI agent would.
    """
    if memory is None or memory.transaction_count < params.memory_length or not candidate_prices:
        return zi_decide(q_held, pv, r_hat, best_bid, best_ask, params.zi, rng, grid)
    side = _choose_side(q_held, pv, rng)
    if side is None:
        return SKIP
    if side is Side.BID:
        valuation = pv.buy_valuation(q_held, r_hat)
        ordered = sorted(candidate_prices)  # ties resolve to the lowest bid
    else:
        valuation = pv.sell_valuation(q_held, r_hat)
        ordered = sorted(candidate_prices, reverse=True)  # ties resolve to the highest ask
    sign = 1.0 if side is Side.BID else -1.0
    if params.grid_mode == "spline":
        belief = hbl_belief_spline(memory, side)
        best_price = None
        best_expected = -float("inf")
        for p in ordered:
            expected = sign * (valuation - grid.to_value(p)) * belief(p)
            if expected > best_expected:
                best_expected = expected
                best_price = p
    else:
        prices = np.array(ordered, dtype=np.int64)
        beliefs = memory.belief_array(prices, side)
        values = np.fromiter((grid.to_value(int(p)) for p in prices),
                             dtype=np.float64, count=len(prices))
        expected = sign * (valuation - values) * beliefs
        best_price = int(prices[np.argmax(expected)])  # first max keeps tie order
    return AgentAction(ActionKind.PLACE, side, max(0, best_price))
