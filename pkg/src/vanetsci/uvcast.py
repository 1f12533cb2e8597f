"""UV-CAST per-vehicle protocol logic with density-adaptive suppression.

A vehicle keeps an exponential moving average ``k_med`` of how many
neighbours it hears in beacons.  Below ``k_low`` it considers itself in the
disconnected regime, above ``k_high`` well connected.  Two optional gates
act on top of the baseline protocol:

* the "p" gate: a well-connected vehicle whose rebroadcast timer expires
  (or that qualifies as a store-carry-forward agent) only goes ahead with
  probability ``p_value(k_med)``;
* the "s" gate: a disconnected vehicle that hears a duplicate while its
  timer is pending keeps the timer with probability ``1 - s_value(k_med)``
  instead of cancelling it.

Random draws are taken only when a gate is active, so with both gates off
the decisions are identical to the baseline for any random stream.

The functions here mutate a :class:`VehicleProtocolState` and return the
actions the caller (the simulator) has to schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ._validation import check_positive, check_unit_interval
from .exceptions import ConfigError

DISCONNECTED, INTERMEDIATE, WELL_CONNECTED = "disconnected", "intermediate", "well_connected"

TRACE_EVENTS = ("rx", "tx", "timer_set", "timer_cancel", "scf_on", "scf_tx",
                "suppress_p", "suppress_s")


@dataclass(frozen=True)
class ROI:
    """Axis-aligned square region ``[x0, x0 + side] x [y0, y0 + side]``."""

    x0: float = 125.0
    y0: float = 125.0
    side: float = 1000.0

    def contains(self, pos) -> bool:
        x, y = pos
        return (self.x0 <= x <= self.x0 + self.side
                and self.y0 <= y <= self.y0 + self.side)

    @property
    def center(self):
        return (self.x0 + self.side / 2, self.y0 + self.side / 2)


@dataclass(frozen=True)
class ProtocolParams:
    beacon_interval_s: float = 1.0
    ema_alpha: float = 0.1
    k_low: float = 3.0
    k_high: float = 4.0
    t_max_wait_s: float = 0.5
    intersection_factor: float = 0.5
    enable_p: bool = False
    enable_s: bool = False
    roi: ROI = field(default_factory=ROI)
    los_range_m: float = 250.0
    block_size_m: float = 125.0
    intersection_radius_m: float = 5.0
    # whether a vehicle whose rebroadcast lost the p draw may still become a
    # store-carry-forward agent for that message
    scf_after_p_suppress: bool = False

    def __post_init__(self):
        check_positive(self.beacon_interval_s, "beacon_interval_s")
        check_unit_interval(self.ema_alpha, "ema_alpha", open_low=True)
        check_positive(self.t_max_wait_s, "t_max_wait_s")
        check_unit_interval(self.intersection_factor, "intersection_factor", open_low=True)
        check_positive(self.los_range_m, "los_range_m")
        if self.k_low > self.k_high:
            raise ConfigError("k_low must not exceed k_high")


@dataclass(frozen=True)
class WarningMessage:
    id: int
    origin_pos: tuple
    relay_pos: tuple
    hop_count: int = 0
    created_s: float = 0.0

    def relayed_by(self, pos) -> "WarningMessage":
        return WarningMessage(self.id, self.origin_pos, tuple(pos), self.hop_count + 1,
                              self.created_s)


@dataclass
class Reception:
    first_rx_time: float
    relay_pos: tuple
    message: WarningMessage
    duplicate_count: int = 0
    p_suppressed: bool = False


@dataclass
class VehicleProtocolState:
    vid: int
    k_med: float = 0.0
    k_med_initialized: bool = False
    neighbor_table: dict = field(default_factory=dict)
    received: dict = field(default_factory=dict)
    pending_timers: dict = field(default_factory=dict)
    scf_carrying: set = field(default_factory=set)
    s_survives: dict = field(default_factory=dict)
    tx_count: int = 0
    rx_count: int = 0

    def has(self, msg_id) -> bool:
        return msg_id in self.received


# actions handed back to the simulator
@dataclass(frozen=True)
class TimerSet:
    msg_id: int
    expiry: float


@dataclass(frozen=True)
class TimerCancel:
    msg_id: int
    by_s_gate: bool = False


@dataclass(frozen=True)
class ScfOn:
    msg_id: int


@dataclass(frozen=True)
class ScfCheck:
    msg_id: int
    at: float


def _check_k(k_med):
    if k_med < 0 or math.isnan(k_med):
        raise ValueError(f"k_med must be >= 0, got {k_med}")


def s_value(k_med: float) -> float:
    _check_k(k_med)
    if k_med < 3:
        return 0.5 + 0.5 * k_med / 3
    return 1.0


def p_value(k_med: float) -> float:
    _check_k(k_med)
    if k_med > 4:
        return 0.5 + 0.5 / (k_med - 4 + 1)
    return 1.0


def update_k_med(state: VehicleProtocolState, observed: int,
                 params: ProtocolParams) -> VehicleProtocolState:
    if observed < 0:
        raise ValueError("observed neighbour count must be >= 0")
    if not state.k_med_initialized:
        state.k_med = float(observed)
        state.k_med_initialized = True
    else:
        a = params.ema_alpha
        state.k_med = (1 - a) * state.k_med + a * observed
    return state


def regime(state: VehicleProtocolState, params: ProtocolParams) -> str:
    if state.k_med < params.k_low:
        return DISCONNECTED
    if state.k_med > params.k_high:
        return WELL_CONNECTED
    return INTERMEDIATE


def at_intersection(pos, params: ProtocolParams) -> bool:
    b = params.block_size_m
    x, y = pos
    dx = x - round(x / b) * b
    dy = y - round(y / b) * b
    return math.hypot(dx, dy) <= params.intersection_radius_m


def wait_time(dist_to_relay_m: float, at_intersection: bool, params: ProtocolParams) -> float:
    """Rebroadcast delay: far receivers and intersection vehicles go first."""
    R = params.los_range_m
    w = params.t_max_wait_s * (1 - min(max(dist_to_relay_m, 0.0), R) / R)
    if at_intersection:
        w *= params.intersection_factor
    return w


def scf_assign(state: VehicleProtocolState, msg_id, params: ProtocolParams, rng) -> bool:
    """Make the vehicle a store-carry-forward agent, gated by p when enabled."""
    if msg_id in state.scf_carrying:
        return True
    prob = p_value(state.k_med) if params.enable_p else 1.0
    if prob < 1.0 and rng.random() >= prob:
        return False
    state.scf_carrying.add(msg_id)
    return True


def on_receive(state: VehicleProtocolState, msg: WarningMessage, now: float, my_pos,
               params: ProtocolParams, rng) -> list:
    """Handle a reception; returns the actions to schedule.

    Receivers outside the ROI drop the message (the reception itself is
    still counted in ``rx_count``).
    """
    state.rx_count += 1
    if not params.roi.contains(my_pos):
        return []

    rec = state.received.get(msg.id)
    if rec is None:
        state.received[msg.id] = Reception(now, tuple(msg.relay_pos), msg)
        d = math.dist(my_pos, msg.relay_pos)
        expiry = now + wait_time(d, at_intersection(my_pos, params), params)
        state.pending_timers[msg.id] = expiry
        actions = [TimerSet(msg.id, expiry)]
        if regime(state, params) == DISCONNECTED:
            if scf_assign(state, msg.id, params, rng):
                actions.append(ScfOn(msg.id))
        else:
            actions.append(ScfCheck(msg.id, now + 2 * params.t_max_wait_s))
        return actions

    rec.duplicate_count += 1
    if msg.id not in state.pending_timers:
        return []
    s_gate = params.enable_s and state.k_med < params.k_low
    if s_gate:
        if msg.id not in state.s_survives:
            # one draw per message, at the first duplicate
            state.s_survives[msg.id] = rng.random() < 1 - s_value(state.k_med)
        if state.s_survives[msg.id]:
            return []
    del state.pending_timers[msg.id]
    return [TimerCancel(msg.id, by_s_gate=s_gate)]


def on_timer_expiry(state: VehicleProtocolState, msg_id, my_pos, params: ProtocolParams,
                    rng):
    """Resolve a pending timer; returns the relayed message or ``None``."""
    state.pending_timers.pop(msg_id, None)
    if params.enable_p and state.k_med > params.k_high:
        if rng.random() >= p_value(state.k_med):
            state.received[msg_id].p_suppressed = True
            return None
    state.tx_count += 1
    return state.received[msg_id].message.relayed_by(my_pos)


def on_scf_check(state: VehicleProtocolState, msg_id, params: ProtocolParams, rng) -> bool:
    """Boundary test: no echo since our own reception makes us an SCF candidate.

    A vehicle that stayed silent because of the p gate has judged its
    neighbourhood dense enough, so by default it is not a candidate.
    """
    if msg_id in state.scf_carrying:
        return False
    rec = state.received[msg_id]
    if rec.duplicate_count > 0:
        return False
    if rec.p_suppressed and not params.scf_after_p_suppress:
        return False
    return scf_assign(state, msg_id, params, rng)


def on_beacon(state: VehicleProtocolState, neighbor_ids, now: float,
              params: ProtocolParams) -> list:
    """Record beacons heard at ``now``; return the newly detected neighbours.

    The neighbour count fed to ``k_med`` is the number of table entries
    younger than two beacon intervals.
    """
    horizon = 2 * params.beacon_interval_s
    table = state.neighbor_table
    for nid in [nid for nid, t in table.items() if now - t >= horizon]:
        del table[nid]
    new = [nid for nid in neighbor_ids if nid not in table]
    for nid in neighbor_ids:
        table[nid] = now
    update_k_med(state, len(table), params)
    return new

