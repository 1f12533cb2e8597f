"""Vehicle snapshot generation for Manhattan-grid and highway scenarios.

Urban maps are square grids of two-way streets spaced ``block_size_m``
apart, wrapped as a torus so that vehicles never leave the map.  Two
placement modes exist: ``uniform_on_streets`` (independent uniform points
on the street network) and ``ca_warmed`` (a Nagel-Schreckenberg cellular
automaton run for a warm-up period).  Highways are a Poisson process of
vehicles along a line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._validation import check_positive, check_random_state, check_unit_interval
from .exceptions import ConfigError

PLACEMENT_MODES = ("uniform_on_streets", "ca_warmed")
LANE_WIDTH_M = 3.5

# turn choices taken at the next intersection
STRAIGHT, TURN_PLUS, TURN_MINUS = 0, 1, 2


@dataclass(frozen=True)
class CAParams:
    cell_len_m: float = 5.0
    v_max_cells: int = 3
    slowdown_prob: float = 0.2
    step_s: float = 1.0

    def __post_init__(self):
        check_positive(self.cell_len_m, "cell_len_m")
        check_positive(self.step_s, "step_s")
        check_unit_interval(self.slowdown_prob, "slowdown_prob")
        if int(self.v_max_cells) != self.v_max_cells or self.v_max_cells < 1:
            raise ConfigError(f"v_max_cells must be a positive integer, got {self.v_max_cells}")


@dataclass(frozen=True)
class UrbanConfig:
    """Manhattan-grid scenario.

    The map side is ``sqrt(area_km2)`` km rounded to a whole number of
    blocks; the vehicle count is always ``round(density * area_km2)``.
    """

    area_km2: float
    density_veh_km2: float
    block_size_m: float = 125.0
    ca_params: CAParams = field(default_factory=CAParams)
    placement_mode: str = "uniform_on_streets"
    warmup_s: float = 900.0

    def __post_init__(self):
        check_positive(self.area_km2, "area_km2")
        check_positive(self.density_veh_km2, "density_veh_km2", strict=False)
        check_positive(self.block_size_m, "block_size_m")
        check_positive(self.warmup_s, "warmup_s", strict=False)
        if self.placement_mode not in PLACEMENT_MODES:
            raise ConfigError(f"placement_mode must be one of {PLACEMENT_MODES}")
        cpb = self.block_size_m / self.ca_params.cell_len_m
        if abs(cpb - round(cpb)) > 1e-9:
            raise ConfigError("block_size_m must be a whole number of CA cells")
        if self.ca_params.v_max_cells >= round(cpb):
            raise ConfigError("v_max_cells must be smaller than the cells per block")

    @property
    def n_lines(self) -> int:
        """Street lines per axis."""
        return max(1, round(math.sqrt(self.area_km2) * 1000.0 / self.block_size_m))

    @property
    def side_m(self) -> float:
        return self.n_lines * self.block_size_m

    @property
    def n_vehicles(self) -> int:
        return int(round(self.density_veh_km2 * self.area_km2))

    @property
    def cells_per_block(self) -> int:
        return int(round(self.block_size_m / self.ca_params.cell_len_m))

    @property
    def cells_per_lane(self) -> int:
        return self.n_lines * self.cells_per_block

    @property
    def total_cells(self) -> int:
        # 2 axes x n_lines streets x 2 directions
        return 4 * self.n_lines * self.cells_per_lane

    @property
    def scale_param(self) -> float:
        return self.area_km2

    scenario = "urban"


@dataclass(frozen=True)
class HighwayConfig:
    length_km: float
    density_veh_km: float
    lanes: int = 1
    placement: str = "poisson_on_line"

    def __post_init__(self):
        check_positive(self.length_km, "length_km")
        check_positive(self.density_veh_km, "density_veh_km", strict=False)
        if int(self.lanes) != self.lanes or self.lanes < 1:
            raise ConfigError(f"lanes must be a positive integer, got {self.lanes}")
        if self.placement != "poisson_on_line":
            raise ConfigError(f"unknown highway placement {self.placement!r}")

    @property
    def expected_vehicles(self) -> float:
        return self.density_veh_km * self.length_km

    @property
    def scale_param(self) -> float:
        return self.length_km

    scenario = "highway"


@dataclass(frozen=True)
class VehicleState:
    id: int
    x_m: float
    y_m: float
    street: str
    heading: float  # degrees, 0 = +x, 90 = +y
    speed_mps: float = 0.0

    @property
    def pos(self):
        return (self.x_m, self.y_m)


@dataclass
class CAState:
    """Cellular-automaton lane state, one entry per vehicle in id order."""

    axis: np.ndarray  # 0: horizontal street (moves in x), 1: vertical
    line: np.ndarray
    direction: np.ndarray  # +1 / -1
    cell: np.ndarray
    speed: np.ndarray  # cells per step
    turn: np.ndarray  # choice at the next intersection

    def copy(self) -> "CAState":
        return CAState(*(a.copy() for a in (self.axis, self.line, self.direction,
                                             self.cell, self.speed, self.turn)))

    def keys(self):
        return list(zip(self.axis.tolist(), self.line.tolist(),
                        self.direction.tolist(), self.cell.tolist()))


@dataclass
class Snapshot:
    time_s: float
    vehicles: list
    config: object = None
    seed: object = None
    ca: CAState | None = None

    def __post_init__(self):
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ConfigError("vehicle ids must be unique")

    def __len__(self):
        return len(self.vehicles)

    @property
    def positions(self) -> np.ndarray:
        if not self.vehicles:
            return np.zeros((0, 2))
        return np.array([(v.x_m, v.y_m) for v in self.vehicles], dtype=float)

    @property
    def scenario(self) -> str:
        return getattr(self.config, "scenario", "urban")


def generate_urban(config: UrbanConfig, seed=None) -> Snapshot:
    """Place ``round(density * area)`` vehicles on the street grid.

    In ``ca_warmed`` mode the vehicles start on random distinct cells and
    the automaton runs for ``config.warmup_s`` seconds first.
    """
    rng = check_random_state(seed)
    n = config.n_vehicles
    if n > config.total_cells:
        raise ConfigError(
            f"{n} vehicles exceed the {config.total_cells} CA cells of the map"
        )
    if config.placement_mode == "uniform_on_streets":
        return _uniform_on_streets(config, n, rng, seed)

    ca = _random_cells(config, n, rng)
    snap = Snapshot(0.0, _ca_vehicles(ca, config), config, seed, ca)
    for _ in range(int(round(config.warmup_s / config.ca_params.step_s))):
        snap = step_urban(snap, config, rng)
    return snap


def _uniform_on_streets(config, n, rng, seed):
    # all streets have the same length, so pick a street uniformly and
    # then a uniform offset along it
    axis = rng.integers(0, 2, size=n)
    line = rng.integers(0, config.n_lines, size=n)
    along = rng.uniform(0.0, config.side_m, size=n)
    direction = np.where(rng.random(n) < 0.5, 1, -1)
    vehicles = []
    for i in range(n):
        fixed = float(line[i] * config.block_size_m)
        if axis[i] == 0:
            x, y, street = float(along[i]), fixed, f"H{line[i]}"
            heading = 0.0 if direction[i] > 0 else 180.0
        else:
            x, y, street = fixed, float(along[i]), f"V{line[i]}"
            heading = 90.0 if direction[i] > 0 else 270.0
        vehicles.append(VehicleState(i, x, y, street, heading, 0.0))
    return Snapshot(0.0, vehicles, config, seed, None)


def _random_cells(config, n, rng) -> CAState:
    flat = rng.choice(config.total_cells, size=n, replace=False) if n else np.zeros(0, int)
    ncell = config.cells_per_lane
    cell = flat % ncell
    rest = flat // ncell
    direction = np.where(rest % 2 == 0, 1, -1)
    rest //= 2
    line = rest % config.n_lines
    axis = rest // config.n_lines
    turn = rng.integers(0, 3, size=n)
    return CAState(axis.astype(int), line.astype(int), direction.astype(int),
                   cell.astype(int), np.zeros(n, dtype=int), turn.astype(int))


def _ca_vehicles(ca: CAState, config: UrbanConfig) -> list:
    cl = config.ca_params.cell_len_m
    to_mps = cl / config.ca_params.step_s
    vehicles = []
    for i in range(len(ca.cell)):
        fixed = float(ca.line[i] * config.block_size_m)
        along = float(ca.cell[i] * cl)
        if ca.axis[i] == 0:
            x, y, street = along, fixed, f"H{ca.line[i]}"
            heading = 0.0 if ca.direction[i] > 0 else 180.0
        else:
            x, y, street = fixed, along, f"V{ca.line[i]}"
            heading = 90.0 if ca.direction[i] > 0 else 270.0
        vehicles.append(VehicleState(i, x, y, street, heading, float(ca.speed[i] * to_mps)))
    return vehicles


def _advance(lane, cell, turn, cpb, ncell):
    """One cell forward; returns (lane, cell, left_intersection)."""
    axis, line, direction = lane
    if cell % cpb == 0:
        if turn == STRAIGHT:
            return lane, (cell + direction) % ncell, True
        new_dir = 1 if turn == TURN_PLUS else -1
        new_lane = (1 - axis, cell // cpb, new_dir)
        return new_lane, (line * cpb + new_dir) % ncell, True
    return lane, (cell + direction) % ncell, False


def step_urban(snapshot: Snapshot, config: UrbanConfig, seed=None) -> Snapshot:
    """Advance every vehicle by one automaton step.

    Vehicles update in id order against the current occupancy, so a
    follower never moves into a cell held by another vehicle of the same
    lane and direction.  Each vehicle accelerates by one cell, brakes to
    the free gap along its path (turns included), slows down at random
    with ``slowdown_prob`` and then moves.
    """
    if snapshot.ca is None:
        raise ConfigError("step_urban needs a snapshot generated in ca_warmed mode")
    rng = check_random_state(seed)
    ca = snapshot.ca.copy()
    p = config.ca_params
    cpb, ncell = config.cells_per_block, config.cells_per_lane
    occupied = {key: i for i, key in enumerate(ca.keys())}

    n = len(ca.cell)
    draws = rng.random(n)
    for i in range(n):
        lane = (int(ca.axis[i]), int(ca.line[i]), int(ca.direction[i]))
        cell, turn = int(ca.cell[i]), int(ca.turn[i])
        v = min(int(ca.speed[i]) + 1, p.v_max_cells)

        path = []
        cur_lane, cur_cell = lane, cell
        for _ in range(v):
            nxt_lane, nxt_cell, crossed = _advance(cur_lane, cur_cell, turn, cpb, ncell)
            if nxt_lane + (nxt_cell,) in occupied:
                break
            path.append((nxt_lane, nxt_cell, crossed))
            cur_lane, cur_cell = nxt_lane, nxt_cell
        v = len(path)
        if v > 0 and draws[i] < p.slowdown_prob:
            v -= 1

        ca.speed[i] = v
        if v == 0:
            continue
        del occupied[lane + (cell,)]
        new_lane, new_cell, _ = path[v - 1]
        occupied[new_lane + (new_cell,)] = i
        ca.axis[i], ca.line[i], ca.direction[i] = new_lane
        ca.cell[i] = new_cell
        if any(step[2] for step in path[:v]):
            ca.turn[i] = rng.integers(0, 3)

    return Snapshot(snapshot.time_s + p.step_s, _ca_vehicles(ca, config),
                    snapshot.config, snapshot.seed, ca)


def generate_highway(config: HighwayConfig, seed=None) -> Snapshot:
    """Poisson placement along ``[0, length]`` with exponential spacings."""
    rng = check_random_state(seed)
    length_m = config.length_km * 1000.0
    xs = []
    if config.density_veh_km > 0:
        mean_gap_m = 1000.0 / config.density_veh_km
        # draw spacings in chunks until the road is covered
        pos = 0.0
        chunk = max(16, int(config.expected_vehicles * 1.2) + 16)
        while True:
            gaps = rng.exponential(mean_gap_m, size=chunk)
            cum = pos + np.cumsum(gaps)
            inside = cum[cum <= length_m]
            xs.extend(inside.tolist())
            if inside.size < chunk:
                break
            pos = float(cum[-1])
    n = len(xs)
    lanes = rng.integers(0, config.lanes, size=n)
    speeds = rng.uniform(22.0, 33.0, size=n)
    vehicles = [
        VehicleState(i, float(xs[i]), float(lanes[i] * LANE_WIDTH_M), f"L{lanes[i]}",
                     0.0, float(speeds[i]))
        for i in range(n)
    ]
    return Snapshot(0.0, vehicles, config, seed, None)


def generate(config, seed=None) -> Snapshot:
    if isinstance(config, HighwayConfig):
        return generate_highway(config, seed)
    return generate_urban(config, seed)


# -- serialization ----------------------------------------------------------

CSV_HEADER = "id,x_m,y_m,street,heading,speed_mps"


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def write_snapshot(snapshot: Snapshot, path) -> Path:
    """Write the vehicle CSV and its ``key=value`` sidecar (``<path>.meta``)."""
    path = Path(path)
    lines = [CSV_HEADER]
    for v in snapshot.vehicles:
        lines.append(f"{v.id},{v.x_m!r},{v.y_m!r},{v.street},{v.heading!r},{v.speed_mps!r}")
    path.write_text("\n".join(lines) + "\n")

    meta = {"topology": snapshot.scenario, "time_s": repr(float(snapshot.time_s)),
            "seed": "" if snapshot.seed is None else str(snapshot.seed)}
    cfg = snapshot.config
    if isinstance(cfg, UrbanConfig):
        meta.update(density=repr(cfg.density_veh_km2), area_km2=repr(cfg.area_km2),
                    block_size_m=repr(cfg.block_size_m), placement_mode=cfg.placement_mode,
                    warmup_s=repr(cfg.warmup_s))
    elif isinstance(cfg, HighwayConfig):
        meta.update(density=repr(cfg.density_veh_km), length_km=repr(cfg.length_km),
                    lanes=str(cfg.lanes))
    _meta_path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return path


def read_key_values(path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"malformed line in {path}: {raw!r}")
        out[key.strip()] = value.strip()
    return out


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    rows = path.read_text().splitlines()
    if not rows or rows[0].strip() != CSV_HEADER:
        raise ConfigError(f"{path} does not start with the header {CSV_HEADER!r}")
    vehicles = []
    for row in rows[1:]:
        if not row.strip():
            continue
        vid, x, y, street, heading, speed = row.split(",")
        vehicles.append(VehicleState(int(vid), float(x), float(y), street,
                                     float(heading), float(speed)))
    config, time_s, seed = None, 0.0, None
    meta_file = _meta_path(path)
    if meta_file.exists():
        meta = read_key_values(meta_file)
        time_s = float(meta.get("time_s", 0.0))
        seed = int(meta["seed"]) if meta.get("seed", "").lstrip("-").isdigit() else None
        if meta.get("topology") == "urban":
            config = UrbanConfig(float(meta["area_km2"]), float(meta["density"]),
                                 block_size_m=float(meta.get("block_size_m", 125.0)),
                                 placement_mode=meta.get("placement_mode", "uniform_on_streets"),
                                 warmup_s=float(meta.get("warmup_s", 900.0)))
        elif meta.get("topology") == "highway":
            config = HighwayConfig(float(meta["length_km"]), float(meta["density"]),
                                   lanes=int(meta.get("lanes", 1)))
    return Snapshot(time_s, vehicles, config, seed, None)


def with_density(config, density):
    """Copy of ``config`` at another density (urban or highway)."""
    if isinstance(config, HighwayConfig):
        return replace(config, density_veh_km=density)
    return replace(config, density_veh_km2=density)
