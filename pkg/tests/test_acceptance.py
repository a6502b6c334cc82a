"""End-to-end acceptance checks.

Each test covers one numbered criterion and reports a single pass/fail
line (echoed in the terminal summary, see conftest).  Golden values come
from worked examples; derived behavior is checked against independently
written oracles and reference loops.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from cdasim import estimator as est
from cdasim.agents import (
    ActionKind,
    HblParams,
    ZiParams,
    hbl_belief,
    hbl_candidate_grid,
    hbl_classify,
    hbl_decide,
    zi_decide,
)
from cdasim.cli import parse_config, run_one
from cdasim.fundamental import OuParams, ou_mean_var, ou_sample
from cdasim.kernel import SimConfig, run
from cdasim.fundamental import DmrParams
from cdasim.orderbook import Order, OrderBook, Side, replay
from cdasim.preferences import PrivateValues
from cdasim.prices import PriceGrid

from test_agents import HBL, PV, ZI, belief_oracle, build_script_book, random_memory
from test_estimator import ScalarKalman
from conftest import FixedRng


CRITERION_LINES = []


@contextmanager
def criterion(number, label):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        CRITERION_LINES.append(f"criterion {number:2d}: FAIL  {label}")
        raise
    elapsed = time.perf_counter() - start
    CRITERION_LINES.append(f"criterion {number:2d}: PASS  {label} ({elapsed:.3f}s)")


def test_criterion_1_zi_golden():
    with criterion(1, "ZI golden example"):
        grid = PriceGrid(0.01)  # 99.55 and 99.67 are not on a 0.1 grid
        zi_half = ZiParams(r_min=0.0, r_max=1.0, eta=0.5, sigma_n_sq=10.0,
                           q_max=3, sigma_pv_sq=25.0)
        # warm up, then time the decision itself
        zi_decide(1, PV, 100.0, None, None, zi_half, FixedRng(0.0, 0.25), grid)
        start = time.perf_counter()
        action = zi_decide(1, PV, 100.0, None, None, zi_half,
                           FixedRng(0.0, 0.25), grid)
        elapsed = time.perf_counter() - start
        assert action.kind is ActionKind.PLACE
        assert action.side is Side.BID
        assert grid.to_value(action.limit_price) == 99.55
        take = zi_decide(1, PV, 100.0, None, grid.to_ticks(99.67), zi_half,
                         FixedRng(0.0, 0.25), grid)
        assert take.kind is ActionKind.TAKE
        place = zi_decide(1, PV, 100.0, None, grid.to_ticks(99.70), zi_half,
                          FixedRng(0.0, 0.25), grid)
        assert place.kind is ActionKind.PLACE
        assert elapsed < 1e-3


def test_criterion_2_hbl_golden():
    with criterion(2, "HBL golden example"):
        start = time.perf_counter()
        book = build_script_book()
        memory = hbl_classify(book.events, now=100, params=HBL)
        grid = PriceGrid(0.1)
        listed = {
            1005: 1.0, 1004: 1.0, 1003: 1.0, 1002: 0.86, 1001: 0.67,
            1000: 3 / 6, 999: 1 / 4, 998: 0.0, 996: 0.0, 995: 0.0,
        }
        for price, prob in listed.items():
            got = hbl_belief(memory, price, Side.BID)
            if price in (1002, 1001):
                assert got == pytest.approx(prob, abs=0.005), price
            else:
                assert got == prob, price
        candidates = hbl_candidate_grid(memory)
        action = hbl_decide(-1, PV, 100.0, memory, candidates, HBL,
                            FixedRng(0.0), grid)
        assert action.side is Side.BID
        assert grid.to_value(action.limit_price) == 100.0
        surplus = PV.buy_valuation(-1, 100.0) - 100.0
        expected = surplus * hbl_belief(memory, action.limit_price, Side.BID)
        assert expected == pytest.approx(0.10, abs=1e-12)
        assert time.perf_counter() - start < 10e-3


def test_criterion_3_staged_formulation():
    with criterion(3, "staged belief formulas"):
        # ten failed bids at 5, ten successful at 7, ten successful at 9;
        # the three staged formulas are test-only oracles
        bids = [(5, False)] * 10 + [(7, True)] * 10 + [(9, True)] * 10

        def stage_exact(p):
            s = sum(1 for q, ok in bids if q == p and ok)
            u = sum(1 for q, ok in bids if q == p and not ok)
            return 0.0 if s + u == 0 else s / (s + u)

        def stage_le(p):
            s = sum(1 for q, ok in bids if q <= p and ok)
            u = sum(1 for q, ok in bids if q <= p and not ok)
            return 0.0 if s + u == 0 else s / (s + u)

        def stage_split(p):
            s = sum(1 for q, ok in bids if q <= p and ok)
            u = sum(1 for q, ok in bids if q >= p and not ok)
            return 0.0 if s + u == 0 else s / (s + u)

        assert stage_exact(8) == 0.0  # 0/0 handled as zero denominator
        assert stage_le(8) == 0.5
        assert stage_split(8) == 1.0


def test_criterion_4_estimator_kalman_oracle():
    with criterion(4, "estimator matches Kalman oracle"):
        start = time.perf_counter()
        rng = np.random.default_rng(77)
        for _ in range(1000):
            kappa = rng.uniform(0.0, 1.0)
            sigma_s_sq = rng.uniform(0.0, 5.0)
            sigma_n_sq = rng.uniform(0.01, 5.0)
            r_bar = rng.uniform(50.0, 150.0)
            params = est.EstimatorParams(r_bar, kappa, sigma_s_sq, sigma_n_sq, 1000)
            belief = est.initial_belief(params)
            oracle = ScalarKalman(r_bar, kappa, sigma_s_sq, sigma_n_sq)
            t = 0
            for _ in range(8):
                t += int(rng.integers(1, 9))
                o = r_bar + rng.normal(0.0, 10.0)
                oracle.predict(t - belief.last_wake)
                belief = est.observe(est.advance(belief, t, params), o, params)
                oracle.update(o)
                assert belief.r_tilde == pytest.approx(oracle.x, rel=1e-9, abs=1e-12)
                assert belief.sigma_tilde_sq == pytest.approx(oracle.p, rel=1e-9,
                                                              abs=1e-12)
        assert time.perf_counter() - start < 5.0


def test_criterion_5_estimator_composition():
    with criterion(5, "estimator advance composition law"):
        rng = np.random.default_rng(5)
        for kappa in (0.0, 1e-6, 0.5, 1.0):
            params = est.EstimatorParams(100.0, kappa, rng.uniform(0.1, 3.0),
                                         1.0, 1000)
            for _ in range(250):
                belief = est.BeliefState(rng.uniform(50, 150), rng.uniform(0, 10), 0)
                d1 = int(rng.integers(1, 25))
                d2 = int(rng.integers(1, 25))
                stepped = est.advance(est.advance(belief, d1, params), d1 + d2, params)
                direct = est.advance(belief, d1 + d2, params)
                assert stepped.r_tilde == pytest.approx(direct.r_tilde, rel=1e-9)
                assert stepped.sigma_tilde_sq == pytest.approx(direct.sigma_tilde_sq,
                                                               rel=1e-9)


def test_criterion_6_ou_sparse_dense_equivalence():
    with criterion(6, "OU skip-ahead sampling moments"):
        start = time.perf_counter()
        grid = PriceGrid(0.01)
        params = OuParams(mu=100.0, gamma=0.2, sigma_sq=4.0, q0=120.0)
        rng = np.random.default_rng(6)
        n = 100_000
        t1, t2 = 3.0, 8.0
        one_hop = np.fromiter(
            (0.01 * ou_sample(120.0, t2, params, z, grid)
             for z in rng.standard_normal(n)),
            dtype=np.float64, count=n)
        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        composed = np.empty(n)
        for i in range(n):
            mid = 0.01 * ou_sample(120.0, t1, params, z1[i], grid)
            composed[i] = 0.01 * ou_sample(mid, t2 - t1, params, z2[i], grid)
        mean, var = ou_mean_var(120.0, t2, params)
        assert one_hop.mean() == pytest.approx(mean, rel=0.02)
        assert one_hop.var() == pytest.approx(var, rel=0.02)
        assert composed.mean() == pytest.approx(mean, rel=0.02)
        assert composed.var() == pytest.approx(var, rel=0.02)
        _, stationary = ou_mean_var(120.0, 1e9, params)
        assert stationary == pytest.approx(params.sigma_sq / (2 * params.gamma),
                                           rel=0.02)
        assert time.perf_counter() - start < 10.0


def _reference_match(resting, side, price, oid):
    """Naive price-time matcher used as a FIFO oracle; one-unit orders."""
    opposite = resting[Side.ASK if side is Side.BID else Side.BID]
    trades = []
    while opposite:
        if side is Side.BID:
            best = min(o[0] for o in opposite)
            if best > price:
                break
        else:
            best = max(o[0] for o in opposite)
            if best < price:
                break
        idx = next(i for i, o in enumerate(opposite) if o[0] == best)
        maker = opposite.pop(idx)
        trades.append((maker[0], maker[1]))  # maker price, maker order id
        break  # incoming orders are single-unit
    if not trades:
        resting[side].append((price, oid))
    return trades


def test_criterion_7_book_property_suite():
    with criterion(7, "order book property suite (10^4 streams)"):
        start = time.perf_counter()
        rng = np.random.default_rng(7)
        for stream in range(10_000):
            book = OrderBook()
            shadow = {Side.BID: [], Side.ASK: []}
            live = []
            expected_trades = []
            n_ops = int(rng.integers(8, 22))
            sides = rng.random(n_ops)
            prices = rng.integers(990, 1011, size=n_ops)
            cancels = rng.random(n_ops)
            for op in range(n_ops):
                t = op + 1
                if live and cancels[op] < 0.2:
                    victim = live.pop(int(rng.integers(len(live))))
                    book.cancel(victim, t)
                    for side in Side:
                        shadow[side] = [o for o in shadow[side] if o[1] != victim]
                    continue
                oid = op + 1
                side = Side.BID if sides[op] < 0.5 else Side.ASK
                price = int(prices[op])
                book.place_limit(Order(oid, oid, side, price, 1, placed_at=t), t)
                expected_trades.extend(_reference_match(shadow, side, price, oid))
                live = [o for s in Side for (_, o) in shadow[s]]
                bb, ba = book.best_bid(), book.best_ask()
                assert bb is None or ba is None or bb < ba  # never crossed
            # FIFO priority and maker pricing against the reference matcher
            got = [(tr.price,
                    tr.sell_order_id if tr.buy_order_id > tr.sell_order_id
                    else tr.buy_order_id)
                   for tr in book.trades]
            assert got == expected_trades, stream
            # conservation: placed = executed + cancelled + resting
            placed = exec_qty = cancel_qty = rest_qty = 0
            for e in book.events:
                if e.kind.value == "PLACED":
                    placed += e.quantity
                elif e.kind.value == "EXECUTED":
                    exec_qty += e.quantity
                else:
                    cancel_qty += e.quantity
            for levels in book.depth_snapshot().values():
                for _, queue in levels:
                    rest_qty += sum(rem for _, rem in queue)
            assert exec_qty % 2 == 0  # two execution events per trade
            assert placed == exec_qty + cancel_qty + rest_qty
            # replay equivalence
            rebuilt = replay(book.events)
            assert rebuilt.depth_snapshot() == book.depth_snapshot()
            assert rebuilt.trades == book.trades
        assert time.perf_counter() - start < 30.0


def test_criterion_8_desk_scale_determinism(tmp_path):
    with criterion(8, "desk-scale byte-identical reruns"):
        resolved = parse_config("""
[market]
horizon = 100000
seed = 11

[agents]
zi_count = 25
hbl_count = 5
""")
        durations = []
        for name in ("a", "b"):
            t0 = time.perf_counter()
            assert run_one({s: dict(k) for s, k in resolved.items()},
                           str(tmp_path / name))
            durations.append(time.perf_counter() - t0)
        for fname in ("events.csv", "trades.csv"):
            with open(tmp_path / "a" / fname, "rb") as fa, \
                 open(tmp_path / "b" / fname, "rb") as fb:
                assert fa.read() == fb.read(), fname
        # same seed, different population: the fundamental path is untouched
        smaller = {s: dict(k) for s, k in resolved.items()}
        smaller["agents"]["zi_count"] = "10"
        smaller["agents"]["hbl_count"] = "2"
        t0 = time.perf_counter()
        assert run_one(smaller, str(tmp_path / "c"))
        durations.append(time.perf_counter() - t0)
        with open(tmp_path / "a" / "fundamental.csv", "rb") as fa, \
             open(tmp_path / "c" / "fundamental.csv", "rb") as fc:
            assert fa.read() == fc.read()
        assert max(durations) < 60.0


def test_criterion_9_hbl_fallback_equivalence():
    with criterion(9, "uninformed HBL trades exactly like ZI"):
        base = dict(
            horizon_T=5000,
            fundamental_variant="dmr",
            fundamental_params=DmrParams(r_bar=100.0, kappa=0.05, sigma_s_sq=1.0),
            zi_params=ZI,
            arrival_rate=0.02,
            master_seed=23,
        )
        as_zi = run(SimConfig(n_zi=12, n_hbl=0, hbl_params=None, **base))
        never_informed = HblParams(zi=ZI, memory_length=10**6, grace_period=100)
        as_hbl = run(SimConfig(n_zi=0, n_hbl=12, hbl_params=never_informed, **base))
        assert as_zi.trades == as_hbl.trades
        assert as_zi.events == as_hbl.events


def test_criterion_10_belief_monotonicity_and_oracle():
    with criterion(10, "belief bounds, monotonicity, rescan oracle"):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            memory = random_memory(rng)
            previous = -1.0
            for p in range(985, 1016):
                prob = hbl_belief(memory, p, Side.BID)
                assert 0.0 <= prob <= 1.0
                assert prob >= previous - 1e-12
                assert prob == pytest.approx(
                    belief_oracle(memory.records, p, Side.BID), abs=1e-12)
                previous = prob
