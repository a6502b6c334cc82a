"""Deterministic discrete-event simulation loop.

Agents wake on Poisson schedules; each wake draws a noisy fundamental
observation, updates the agent's belief, projects the final fundamental,
cancels any outstanding order and routes the strategy's new order to the
book.  At the horizon every agent's payoff marks its holdings at the final
fundamental plus the realized private values of the units held.

Everything is a pure function of (config, master seed): two runs with the
same inputs produce bit-identical logs, and the fundamental path is
derived from its own RNG stream so the agent population cannot perturb it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import count

import numpy as np

from . import agents as strategies
from . import estimator as est
from .fundamental import (
    DmrFundamental,
    DmrParams,
    FileFundamental,
    MegashockFundamental,
    MegashockParams,
    OuFundamental,
    OuParams,
)
from .orderbook import Order, OrderBook, Side
from .preferences import PrivateValues
from .prices import PriceGrid
from .rng import child_stream

ZI = "ZI"
HBL = "HBL"


@dataclass(frozen=True)
class OutputOptions:
    trace_estimator: bool = False
    trace_decisions: bool = False
    dump_fundamental: bool = False


@dataclass(frozen=True)
class SimConfig:
    horizon_T: int
    fundamental_variant: str  # dmr | ou | megashock | file
    fundamental_params: object  # DmrParams | OuParams | MegashockParams | None
    n_zi: int
    n_hbl: int
    zi_params: strategies.ZiParams
    hbl_params: strategies.HblParams | None
    arrival_rate: float
    master_seed: int
    tick_size: float = 0.1
    fundamental_file: str | None = None
    file_estimator: est.EstimatorParams | None = None
    output: OutputOptions = field(default_factory=OutputOptions)

    def __post_init__(self) -> None:
        if self.horizon_T < 1:
            raise ValueError("horizon_T must be >= 1")
        if self.n_zi + self.n_hbl < 1:
            raise ValueError("population must contain at least one agent")
        if self.arrival_rate <= 0.0:
            raise ValueError("arrival_rate must be > 0")
        if self.n_hbl > 0 and self.hbl_params is None:
            raise ValueError("hbl_params required when n_hbl > 0")
        if self.fundamental_variant not in ("dmr", "ou", "megashock", "file"):
            raise ValueError(f"unknown fundamental variant {self.fundamental_variant!r}")
        if self.fundamental_variant == "file":
            if self.fundamental_file is None:
                raise ValueError("file variant requires fundamental_file")
            if self.file_estimator is None:
                raise ValueError("file variant requires estimator parameters")


@dataclass
class AgentRecord:
    agent_id: int
    strategy: str
    pv: PrivateValues
    belief: est.BeliefState
    rng: np.random.Generator
    cash: float = 0.0
    q_held: int = 0
    open_order_id: int | None = None


@dataclass(frozen=True)
class AgentSummary:
    agent_id: int
    strategy: str
    cash: float
    q_held: int
    payoff: float


@dataclass
class SimResult:
    final_fundamental: int  # ticks
    agents: list[AgentSummary]
    events: tuple
    trades: tuple
    fundamental_trace: list[tuple[int, int]]
    grid: PriceGrid
    invariants_ok: bool
    invariant_summary: dict
    private_values: dict[int, tuple[float, ...]]
    estimator_trace: list[tuple] = field(default_factory=list)
    decision_trace: list[tuple] = field(default_factory=list)


def schedule_arrivals(arrival_rate: float, horizon_T: int, rng: np.random.Generator) -> list[int]:
    """Strictly increasing integer wake times from exponential inter-arrivals.

    Real-valued cumulative arrival times are rounded up to the next step;
    collisions after rounding are bumped forward by one step.
    """
    if arrival_rate <= 0.0:
        raise ValueError("arrival_rate must be > 0")
    times: list[int] = []
    clock = 0.0
    prev = 0
    while True:
        clock += rng.exponential(1.0 / arrival_rate)
        step = math.ceil(clock)
        if step <= prev:
            step = prev + 1
        if step > horizon_T:
            return times
        times.append(step)
        prev = step


def mark_observation(r_ticks: int, sigma_n_sq: float, rng: np.random.Generator,
                     grid: PriceGrid) -> int:
    """Noisy fundamental observation, rounded to tick and floored at zero."""
    o = grid.to_value(r_ticks) + rng.normal(0.0, math.sqrt(sigma_n_sq))
    return max(0, grid.to_ticks(o))


def build_fundamental(config: SimConfig, grid: PriceGrid):
    variant = config.fundamental_variant
    if variant == "dmr":
        return DmrFundamental(config.fundamental_params, grid, config.master_seed,
                              config.horizon_T)
    if variant == "ou":
        return OuFundamental(config.fundamental_params, grid, config.master_seed,
                             config.horizon_T)
    if variant == "megashock":
        return MegashockFundamental(config.fundamental_params, grid, config.master_seed,
                                    config.horizon_T)
    return FileFundamental.from_path(config.fundamental_file, grid)


def estimator_params(config: SimConfig) -> est.EstimatorParams:
    """Agent-side model of the fundamental process.

    The discrete parameters are used as-is.  The continuous variants map to
    the discrete model with kappa = 1 - exp(-gamma) and the matching
    one-step transition variance, which makes the unit-step means and
    variances of the two processes coincide.
    """
    variant = config.fundamental_variant
    sigma_n_sq = config.zi_params.sigma_n_sq
    if variant == "dmr":
        p: DmrParams = config.fundamental_params
        return est.EstimatorParams(p.r_bar, p.kappa, p.sigma_s_sq, sigma_n_sq,
                                   config.horizon_T)
    if variant in ("ou", "megashock"):
        ou: OuParams = (config.fundamental_params.ou if variant == "megashock"
                        else config.fundamental_params)
        kappa = 1.0 - math.exp(-ou.gamma)
        sigma_s_sq = ou.sigma_sq / (2.0 * ou.gamma) * (1.0 - math.exp(-2.0 * ou.gamma))
        return est.EstimatorParams(ou.mu, kappa, sigma_s_sq, sigma_n_sq, config.horizon_T)
    base = config.file_estimator
    return est.EstimatorParams(base.r_bar, base.kappa, base.sigma_s_sq, sigma_n_sq,
                               config.horizon_T)


def run(config: SimConfig) -> SimResult:
    grid = PriceGrid(config.tick_size)
    fundamental = build_fundamental(config, grid)
    ep = estimator_params(config)
    n_agents = config.n_zi + config.n_hbl

    records: list[AgentRecord] = []
    for i in range(n_agents):
        strategy = ZI if i < config.n_zi else HBL
        rng = child_stream(config.master_seed, f"agent-{i}")
        pv = PrivateValues.draw(config.zi_params.q_max, config.zi_params.sigma_pv_sq, rng)
        records.append(AgentRecord(i, strategy, pv, est.initial_belief(ep), rng))

    wakes: list[tuple[int, int]] = []
    for record in records:
        arrivals_rng = child_stream(config.master_seed, f"arrivals-{record.agent_id}")
        for t in schedule_arrivals(config.arrival_rate, config.horizon_T, arrivals_rng):
            wakes.append((t, record.agent_id))
    wakes.sort()  # ties broken by agent_id

    book = OrderBook()
    history = strategies.OrderHistory()
    order_ids = count(1)
    order_owner: dict[int, int] = {}
    estimator_trace: list[tuple] = []
    decision_trace: list[tuple] = []
    invariants_ok = True
    breaches: list[str] = []

    def check_invariants(t: int) -> None:
        nonlocal invariants_ok
        cash_total = sum(r.cash for r in records)
        q_total = sum(r.q_held for r in records)
        if abs(cash_total) > 1e-6 or q_total != 0:
            invariants_ok = False
            breaches.append(f"t={t}: cash={cash_total!r} q={q_total}")

    for t, agent_id in wakes:
        record = records[agent_id]
        r_ticks = fundamental.value_at(t)
        o_ticks = mark_observation(r_ticks, config.zi_params.sigma_n_sq, record.rng, grid)
        delta = t - record.belief.last_wake
        belief = est.advance(record.belief, t, ep)
        belief = est.observe(belief, grid.to_value(o_ticks), ep)
        record.belief = belief
        r_hat = est.project_final(belief, ep)
        if config.output.trace_estimator:
            estimator_trace.append((t, agent_id, delta, grid.format(o_ticks),
                                    belief.r_tilde, belief.sigma_tilde_sq, r_hat))

        if record.open_order_id is not None:
            if book.cancel(record.open_order_id, t) is not None:
                history.mark_cancelled(record.open_order_id, t)
            record.open_order_id = None

        action = _decide(record, r_hat, book, history, config, grid, t)
        if config.output.trace_decisions:
            decision_trace.append((t, agent_id, record.strategy, action.kind.value,
                                   action.side.value if action.side else "",
                                   grid.format(action.limit_price)
                                   if action.limit_price is not None else ""))
        if action.kind is strategies.ActionKind.SKIP:
            continue

        order = Order(next(order_ids), agent_id, action.side, action.limit_price,
                      quantity=1, placed_at=t)
        order_owner[order.order_id] = agent_id
        history.add(order.order_id, order.side, order.limit_price, t)
        trades_before = len(book.trades)
        book.place_limit(order, t)
        new_trades = book.trades[trades_before:]
        for trade in new_trades:
            history.mark_executed(trade.buy_order_id, t)
            history.mark_executed(trade.sell_order_id, t)
            value = grid.to_value(trade.price) * trade.quantity
            buyer = records[trade.buyer_id]
            seller = records[trade.seller_id]
            buyer.cash -= value
            buyer.q_held += trade.quantity
            seller.cash += value
            seller.q_held -= trade.quantity
            for oid in (trade.buy_order_id, trade.sell_order_id):
                owner = records[order_owner[oid]]
                if owner.open_order_id == oid and book.placed_order(oid) is None:
                    owner.open_order_id = None
        if book.placed_order(order.order_id) is not None:
            record.open_order_id = order.order_id
        if new_trades:
            check_invariants(t)

    final_ticks = fundamental.value_at(config.horizon_T)
    final_value = grid.to_value(final_ticks)
    summaries = []
    for record in records:
        realized_pv = 0.0
        if record.q_held > 0:
            realized_pv = sum(record.pv.theta(k) for k in range(1, record.q_held + 1))
        elif record.q_held < 0:
            realized_pv = -sum(record.pv.theta(k) for k in range(record.q_held + 1, 1))
        payoff = record.cash + record.q_held * final_value + realized_pv
        summaries.append(AgentSummary(record.agent_id, record.strategy, record.cash,
                                      record.q_held, payoff))

    return SimResult(
        final_fundamental=final_ticks,
        agents=summaries,
        events=book.events,
        trades=book.trades,
        fundamental_trace=fundamental.evaluations(),
        grid=grid,
        invariants_ok=invariants_ok,
        invariant_summary={"breaches": breaches, "trades": len(book.trades),
                           "events": len(book.events), "wakes": len(wakes)},
        private_values={r.agent_id: r.pv.values for r in records},
        estimator_trace=estimator_trace,
        decision_trace=decision_trace,
    )


def _decide(record: AgentRecord, r_hat: float, book: OrderBook,
            history: strategies.OrderHistory, config: SimConfig,
            grid: PriceGrid, now: int) -> strategies.AgentAction:
    best_bid = book.best_bid()
    best_ask = book.best_ask()
    if record.strategy == ZI:
        return strategies.zi_decide(record.q_held, record.pv, r_hat, best_bid, best_ask,
                                    config.zi_params, record.rng, grid)
    hp = config.hbl_params
    memory = None
    candidates: list[int] = []
    if len(book.trades) >= hp.memory_length:
        window_start = _memory_window_start(book, hp.memory_length)
        memory = history.memory(window_start, now, hp, len(book.trades))
        candidates = strategies.hbl_candidate_grid(memory, hp.grid_mode)
    return strategies.hbl_decide(record.q_held, record.pv, r_hat, memory, candidates,
                                 hp, record.rng, grid, best_bid, best_ask)


def _memory_window_start(book: OrderBook, memory_length: int) -> int:
    start = None
    for trade in book.trades[-memory_length:]:
        for oid in (trade.buy_order_id, trade.sell_order_id):
            placed_at = book.placement_time(oid)
            if start is None or placed_at < start:
                start = placed_at
    return start if start is not None else 0
