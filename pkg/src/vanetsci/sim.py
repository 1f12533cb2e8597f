"""Seeded discrete-event simulation of a single warning-message broadcast.

One run: the cellular automaton warms up for ``warmup_s`` seconds while
vehicles beacon every ``beacon_interval_s`` (so their ``k_med`` settles),
then the vehicle nearest the ROI centre broadcasts a warning.  For
``collect_s`` seconds the simulator processes mobility steps, beacons,
rebroadcast timers and store-carry-forward checks in time order.  Ties are
broken by (time, event kind, vehicle id).  Delivery is instantaneous and
lossless to every current one-hop neighbour.

Each run draws three independent random streams from its seed (placement,
mobility, protocol), so switching a mechanism on or off never changes the
vehicles' trajectories.
"""

from __future__ import annotations

import copy
import csv
import functools
import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, SimulationError
from .graph import CommGraph, RangeModel, link_edges
from .scenario import UrbanConfig, generate_urban, step_urban
from .uvcast import (
    ROI,
    ProtocolParams,
    Reception,
    ScfCheck,
    ScfOn,
    TimerCancel,
    TimerSet,
    VehicleProtocolState,
    WarningMessage,
    on_beacon,
    on_receive,
    on_scf_check,
    on_timer_expiry,
    regime,
    scf_assign,
    DISCONNECTED,
)

log = logging.getLogger(__name__)

MECHANISMS = {
    "baseline": (False, False),
    "p_only": (True, False),
    "s_only": (False, True),
    "p_and_s": (True, True),
    "flooding_oracle": None,
}
ALIASES = {"p": "p_only", "s": "s_only", "ps": "p_and_s", "oracle": "flooding_oracle"}

# event kinds, in tie-breaking order
MOBILITY, BEACON, SOURCE, TIMER, SCF_CHECK = range(5)

MSG_ID = 0


def resolve_mechanism(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in MECHANISMS:
        raise ConfigError(f"unknown mechanism {name!r}; choose from {sorted(MECHANISMS)}")
    return name


@dataclass(frozen=True)
class SimConfig:
    scenario: UrbanConfig
    range: RangeModel = field(default_factory=RangeModel)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    warmup_s: float = 900.0
    collect_s: float = 120.0
    runs: int = 10
    base_seed: int = 0
    source: str = "center_of_roi"
    static: bool = False

    def __post_init__(self):
        if self.warmup_s <= 0 or self.collect_s <= 0:
            raise ConfigError("warmup_s and collect_s must be > 0")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.source != "center_of_roi":
            raise ConfigError("only source='center_of_roi' is supported")

    @classmethod
    def for_density(cls, density, roi_side_m=1000.0, block_size_m=125.0, **kwargs):
        """Standard layout: the ROI plus one block of margin on every side."""
        side_m = roi_side_m + 2 * block_size_m
        scenario = UrbanConfig((side_m / 1000.0) ** 2, density, block_size_m,
                               placement_mode="ca_warmed")
        rng_model = kwargs.pop("range", RangeModel())
        protocol = kwargs.pop("protocol", None) or ProtocolParams(
            roi=ROI(block_size_m, block_size_m, roi_side_m),
            los_range_m=rng_model.los_range_m, block_size_m=block_size_m)
        return cls(scenario, rng_model, protocol, **kwargs)


@dataclass(frozen=True)
class RunMetrics:
    reachability: float
    avg_received_distance_m: float
    avg_msgs_received: float
    avg_msgs_transmitted: float

    FIELDS = ("reachability", "avg_received_distance_m", "avg_msgs_received",
              "avg_msgs_transmitted")

    def as_tuple(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass
class RunResult:
    run: int
    seed: int
    metrics: RunMetrics | None
    source: int | None = None
    informed: set = field(default_factory=set)
    ever_in_roi: set = field(default_factory=set)
    trace: list = field(default_factory=list)
    total_receptions: int = 0
    neighbor_sum: int = 0
    positions_t0: np.ndarray | None = None
    discarded: bool = False


@dataclass
class SimMetrics:
    mechanism: str
    per_run: list  # RunMetrics
    runs: list = field(default_factory=list)  # RunResult, for inspection
    discarded_runs: list = field(default_factory=list)
    run_ids: list = field(default_factory=list)

    def _column(self, name):
        return np.array([getattr(r, name) for r in self.per_run], dtype=float)

    def mean(self, name):
        return float(np.nanmean(self._column(name)))

    def std(self, name):
        col = self._column(name)
        return float(np.nanstd(col, ddof=1)) if col.size > 1 else 0.0

    @property
    def reachability(self):
        return self.mean("reachability")

    @property
    def avg_received_distance_m(self):
        return self.mean("avg_received_distance_m")

    @property
    def avg_msgs_received(self):
        return self.mean("avg_msgs_received")

    @property
    def avg_msgs_transmitted(self):
        return self.mean("avg_msgs_transmitted")


def _streams(seed):
    placement, mobility, protocol = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(placement), np.random.default_rng(mobility),
            np.random.default_rng(protocol))


def _neighbors(snapshot, range_model, block_size_m):
    edges = link_edges(snapshot.positions, range_model, "urban", block_size_m)
    return CommGraph.from_edges(len(snapshot), edges)


def _event_times(start, end, interval, inclusive):
    k = 1
    while True:
        t = start + k * interval
        if t > end + 1e-9 or (not inclusive and t >= end - 1e-9):
            return
        yield t
        k += 1


@functools.lru_cache(maxsize=32)
def _warm_state(scenario, range_model, protocol, warmup_s, static, seed):
    placement_rng, mobility_rng, _ = _streams(seed)
    cfg = replace(scenario, placement_mode="ca_warmed", warmup_s=0.0)
    snap = generate_urban(cfg, placement_rng)
    states = [VehicleProtocolState(i) for i in range(len(snap))]
    step_s = scenario.ca_params.step_s

    events = [(t, BEACON) for t in _event_times(0.0, warmup_s, protocol.beacon_interval_s, True)]
    if not static:
        events += [(t, MOBILITY) for t in _event_times(0.0, warmup_s, step_s, True)]
    events.sort()
    for t, kind in events:
        if kind == MOBILITY:
            snap = step_urban(snap, cfg, mobility_rng)
        else:
            graph = _neighbors(snap, range_model, scenario.block_size_m)
            for st, nb in zip(states, graph.adjacency):
                on_beacon(st, nb, t, protocol)
    return snap, states, mobility_rng.bit_generator.state


class _Run:
    def __init__(self, config: SimConfig, mechanism: str, run_index: int, keep_trace=True):
        self.cfg = config
        self.mechanism = mechanism
        self.seed = config.base_seed + run_index
        self.run_index = run_index
        self.keep_trace = keep_trace
        flags = MECHANISMS[mechanism]
        base = config.protocol
        if flags is not None:
            base = replace(base, enable_p=flags[0], enable_s=flags[1])
        self.params = base

        # the warm-up does not depend on the mechanism, so it is cached
        warm_params = replace(config.protocol, enable_p=False, enable_s=False)
        snap, states, mob_state = _warm_state(config.scenario, config.range, warm_params,
                                              config.warmup_s, config.static, self.seed)
        self.snap = snap
        self.states = copy.deepcopy(states)
        _, self.mobility_rng, self.protocol_rng = _streams(self.seed)
        self.mobility_rng.bit_generator.state = mob_state
        self.t0 = config.warmup_s
        self.t_end = config.warmup_s + config.collect_s
        n = len(snap)
        self.roi_rx = np.zeros(n, dtype=np.int64)
        self.roi_tx = np.zeros(n, dtype=np.int64)
        self.rx_distance = {}
        self.ever_in_roi = set()
        self.trace = []
        self.total_receptions = 0
        self.neighbor_sum = 0
        self._refresh()

    # -- helpers ----------------------------------------------------------
    def _refresh(self):
        self.pos = self.snap.positions
        self.graph = _neighbors(self.snap, self.cfg.range, self.cfg.scenario.block_size_m)
        roi = self.params.roi
        self.in_roi = np.array([roi.contains(p) for p in self.pos], dtype=bool)
        self.ever_in_roi.update(np.flatnonzero(self.in_roi).tolist())

    def _log(self, t, vid, event, msg_id=MSG_ID):
        if self.keep_trace:
            self.trace.append((t, vid, event, msg_id, self.states[vid].k_med))

    def _push(self, t, kind, vid, payload=None):
        self._seq += 1
        heapq.heappush(self._heap, (t, kind, vid, self._seq, payload))

    def _transmit(self, t, vid, msg, event="tx"):
        self._log(t, vid, event, msg.id)
        if self.in_roi[vid]:
            self.roi_tx[vid] += 1
        neighbours = self.graph.adjacency[vid]
        self.neighbor_sum += len(neighbours)
        for u in neighbours:
            self.total_receptions += 1
            st = self.states[u]
            inside = bool(self.in_roi[u])
            if inside:
                self.roi_rx[u] += 1
                self._log(t, u, "rx", msg.id)
            first = not st.has(msg.id)
            actions = on_receive(st, msg, t, tuple(self.pos[u]), self.params, self.protocol_rng)
            if first and st.has(msg.id):
                self.rx_distance[u] = math.dist(self.pos[u], msg.origin_pos)
            self._apply(t, u, actions)

    def _apply(self, t, vid, actions):
        for act in actions:
            if isinstance(act, TimerSet):
                self._log(t, vid, "timer_set", act.msg_id)
                self._push(act.expiry, TIMER, vid, (act.msg_id, act.expiry))
            elif isinstance(act, TimerCancel):
                self._log(t, vid, "suppress_s" if act.by_s_gate else "timer_cancel", act.msg_id)
            elif isinstance(act, ScfOn):
                self._log(t, vid, "scf_on", act.msg_id)
            elif isinstance(act, ScfCheck):
                self._push(act.at, SCF_CHECK, vid, act.msg_id)

    def _pick_source(self):
        inside = np.flatnonzero(self.in_roi)
        if inside.size == 0:
            return None
        cx, cy = self.params.roi.center
        d = np.hypot(self.pos[inside, 0] - cx, self.pos[inside, 1] - cy)
        return int(inside[np.argmin(d)])

    # -- main loops --------------------------------------------------------
    def run(self) -> RunResult:
        source = self._pick_source()
        if source is None:
            log.warning("run %d (seed %d): no vehicle inside the ROI at t0, discarded",
                        self.run_index, self.seed)
            return RunResult(self.run_index, self.seed, None, discarded=True)
        if self.mechanism == "flooding_oracle":
            return self._run_oracle(source)
        return self._run_protocol(source)

    def _run_protocol(self, source):
        self._heap, self._seq = [], 0
        step_s = self.cfg.scenario.ca_params.step_s
        if not self.cfg.static:
            for t in _event_times(self.t0, self.t_end, step_s, False):
                self._push(t, MOBILITY, -1)
        for t in _event_times(self.t0, self.t_end, self.params.beacon_interval_s, False):
            self._push(t, BEACON, -1)
        self._push(self.t0, SOURCE, source)
        positions_t0 = self.pos.copy()

        while self._heap:
            t, kind, vid, _, payload = heapq.heappop(self._heap)
            if kind == MOBILITY:
                self.snap = step_urban(self.snap, self.cfg.scenario, self.mobility_rng)
                self._refresh()
            elif kind == BEACON:
                self._beacon(t)
            elif kind == SOURCE:
                self._originate(t, vid)
            elif kind == TIMER:
                msg_id, expiry = payload
                st = self.states[vid]
                if st.pending_timers.get(msg_id) != expiry:
                    continue  # cancelled
                relayed = on_timer_expiry(st, msg_id, tuple(self.pos[vid]), self.params,
                                          self.protocol_rng)
                if relayed is None:
                    self._log(t, vid, "suppress_p", msg_id)
                else:
                    self._transmit(t, vid, relayed)
            elif kind == SCF_CHECK:
                if on_scf_check(self.states[vid], payload, self.params, self.protocol_rng):
                    self._log(t, vid, "scf_on", payload)

        informed = {v for v, st in enumerate(self.states) if st.has(MSG_ID)}
        return self._result(source, informed, positions_t0)

    def _originate(self, t, vid):
        st = self.states[vid]
        pos = tuple(self.pos[vid])
        msg = WarningMessage(MSG_ID, pos, pos, 0, t)
        st.received[MSG_ID] = Reception(t, pos, msg)
        st.tx_count += 1
        self.rx_distance[vid] = 0.0
        if regime(st, self.params) == DISCONNECTED:
            if scf_assign(st, MSG_ID, self.params, self.protocol_rng):
                self._log(t, vid, "scf_on")
        else:
            self._push(t + 2 * self.params.t_max_wait_s, SCF_CHECK, vid, MSG_ID)
        self._transmit(t, vid, msg)

    def _beacon(self, t):
        for vid, nb in enumerate(self.graph.adjacency):
            st = self.states[vid]
            new = on_beacon(st, nb, t, self.params)
            if new and st.scf_carrying and self.in_roi[vid]:
                for msg_id in sorted(st.scf_carrying):
                    st.tx_count += 1
                    relayed = st.received[msg_id].message.relayed_by(tuple(self.pos[vid]))
                    self._transmit(t, vid, relayed, event="scf_tx")

    def _run_oracle(self, source):
        positions_t0 = self.pos.copy()
        graphs, positions, roi_masks = [self.graph], [self.pos], [self.in_roi]
        if not self.cfg.static:
            for _ in _event_times(self.t0, self.t_end, self.cfg.scenario.ca_params.step_s, False):
                self.snap = step_urban(self.snap, self.cfg.scenario, self.mobility_rng)
                self._refresh()
                graphs.append(self.graph)
                positions.append(self.pos)
                roi_masks.append(self.in_roi)
        informed_at = _flood(graphs, source)
        origin = positions[0][source]
        for v, k in informed_at.items():
            self.rx_distance[v] = float(np.hypot(*(positions[k][v] - origin)))
            self.neighbor_sum += len(graphs[k].adjacency[v])
            if roi_masks[k][v]:
                self.roi_tx[v] += 1
            for u in graphs[k].adjacency[v]:
                self.total_receptions += 1
                if roi_masks[k][u]:
                    self.roi_rx[u] += 1
        return self._result(source, set(informed_at), positions_t0)

    def _result(self, source, informed, positions_t0):
        counted = sorted(self.ever_in_roi)
        got = [v for v in counted if v in informed]
        reach = len(got) / len(counted)
        dists = [self.rx_distance[v] for v in got if v in self.rx_distance]
        metrics = RunMetrics(
            reachability=reach,
            avg_received_distance_m=float(np.mean(dists)) if dists else float("nan"),
            avg_msgs_received=float(self.roi_rx[counted].mean()),
            avg_msgs_transmitted=float(self.roi_tx[counted].mean()),
        )
        return RunResult(self.run_index, self.seed, metrics, source, informed,
                         set(self.ever_in_roi), self.trace, self.total_receptions,
                         self.neighbor_sum, positions_t0)


def _flood(graphs, source) -> dict:
    """Epoch at which each vehicle is first informed by ideal flooding.

    At every epoch the informed set grows to every component that already
    holds an informed vehicle, which bounds any relaying scheme from above.
    """
    informed_at = {source: 0}
    for k, g in enumerate(graphs):
        labels = {int(g.component_id[v]) for v in informed_at}
        for v in np.flatnonzero(np.isin(g.component_id, list(labels))).tolist():
            informed_at.setdefault(v, k)
    return informed_at


def run_flooding_oracle(graphs, source, counted=None) -> SimMetrics:
    """Ideal lossless flood over a sequence of graphs (a single graph is fine).

    ``counted`` restricts the vehicles that enter the reachability
    denominator (by default all).  Each informed vehicle is charged one
    transmission, received by its neighbours at that moment.
    """
    if isinstance(graphs, CommGraph):
        graphs = [graphs]
    graphs = list(graphs)
    n = graphs[0].n
    counted = list(range(n)) if counted is None else sorted(counted)
    informed_at = _flood(graphs, source)
    rx = np.zeros(n)
    tx = np.zeros(n)
    for v, k in informed_at.items():
        tx[v] += 1
        for u in graphs[k].adjacency[v]:
            rx[u] += 1
    reach = sum(1 for v in counted if v in informed_at) / len(counted)
    m = RunMetrics(reach, float("nan"), float(rx[counted].mean()), float(tx[counted].mean()))
    return SimMetrics("flooding_oracle", [m])


def run_once(config: SimConfig, mechanism: str, run_index: int = 0, keep_trace=True) -> RunResult:
    return _Run(config, resolve_mechanism(mechanism), run_index, keep_trace).run()


def run_simulation(config: SimConfig, mechanism: str = "baseline", keep_runs=False) -> SimMetrics:
    """Run ``config.runs`` seeded runs (seeds ``base_seed + i``) and aggregate."""
    mechanism = resolve_mechanism(mechanism)
    per_run, kept, discarded, ids = [], [], [], []
    for i in range(config.runs):
        res = run_once(config, mechanism, i, keep_trace=keep_runs)
        if res.discarded:
            discarded.append(i)
            continue
        per_run.append(res.metrics)
        ids.append(i)
        if keep_runs:
            kept.append(res)
    if not per_run:
        raise SimulationError(f"all {config.runs} runs were discarded (empty ROI)")
    return SimMetrics(mechanism, per_run, kept, discarded, ids)


def duplicate_statistics(trace) -> float:
    """Mean number of duplicate receptions per informed vehicle.

    A vehicle is informed from its first in-ROI reception; the originator
    (the first transmitter in the trace) holds the message from the start,
    so all of its receptions are duplicates.
    """
    rx, source = {}, None
    for _, vid, event, _, _ in trace:
        if event == "tx" and source is None:
            source = vid
        elif event == "rx":
            rx[vid] = rx.get(vid, 0) + 1
    informed = set(rx)
    if source is not None:
        informed.add(source)
    if not informed:
        return 0.0
    dup = [rx.get(v, 0) - (0 if v == source else 1) for v in informed]
    return float(np.mean(dup))


# -- CSV output ---------------------------------------------------------------

RESULT_HEADER = ["density", "mechanism", "run", "reachability", "avg_recv_dist_m",
                 "avg_msgs_rx", "avg_msgs_tx"]
AGGREGATE_HEADER = ["density", "mechanism", "runs",
                    "reachability_mean", "reachability_std",
                    "avg_recv_dist_m_mean", "avg_recv_dist_m_std",
                    "avg_msgs_rx_mean", "avg_msgs_rx_std",
                    "avg_msgs_tx_mean", "avg_msgs_tx_std"]
TRACE_HEADER = ["time_s", "vehicle", "event", "msg_id", "k_med"]


def write_results(rows, path, aggregate_path=None):
    """``rows`` is an iterable of ``(density, SimMetrics)``."""
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_HEADER)
        for density, sm in rows:
            ids = sm.run_ids or range(len(sm.per_run))
            for i, m in zip(ids, sm.per_run):
                w.writerow([density, sm.mechanism, i] + [repr(float(v)) for v in m.as_tuple()])
    if aggregate_path is not None:
        with open(aggregate_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(AGGREGATE_HEADER)
            for density, sm in rows:
                vals = []
                for f in RunMetrics.FIELDS:
                    vals += [sm.mean(f), sm.std(f)]
                w.writerow([density, sm.mechanism, len(sm.per_run)]
                           + [repr(float(v)) for v in vals])
    return Path(path)


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for t, vid, event, msg_id, k_med in trace:
            w.writerow([repr(float(t)), vid, event, msg_id, repr(float(k_med))])
    return Path(path)
