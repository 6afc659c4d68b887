"""Network topologies and per-slot received-energy reports.

Received energy follows path loss with log-normal shadowing,
``Pr = Pt * r**-alpha * exp(a * beta)`` with ``a = ln(10)/10`` and
``beta ~ N(0, sigma2)``.  In dB this is ``10 log10(Pt) - 10 alpha log10(r) + beta``.

Shadowing variates for slot ``s`` and SU ``i`` are a pure function of
``(seed, stream, s, i)``: a splitmix64 hash of that tuple gives two uniforms,
and Box-Muller (cosine branch) turns them into one standard normal.  Slots can
therefore be generated in any order or split across workers without changing
a single bit of the output.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

DB_SCALE = math.log(10.0) / 10.0  # the shadowing constant `a`

MAX_PLACEMENT_TRIES = 10_000


class Placement(str, enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"


class Source(str, enum.Enum):
    PU = "pu"
    ATTACKER = "attacker"


_STREAM_TAG = {Source.PU: 1, Source.ATTACKER: 2}


class TopologyError(ValueError):
    """Raised when a placement cannot satisfy the geometric constraints."""


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def distance(self, other: Position) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class TransmitterProfile:
    position: Position
    tx_power: float = 10.0
    sigma2: float = 8.0

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ValueError(f"tx_power must be > 0, got {self.tx_power}")
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = 4.0
    min_distance: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.min_distance > 0:
            raise ValueError(f"min_distance must be > 0, got {self.min_distance}")


@dataclass(frozen=True)
class Topology:
    su_positions: np.ndarray  # (n, 2), read-only
    pu: TransmitterProfile
    attacker: TransmitterProfile
    placement: Placement
    d_pu_attacker: float

    @property
    def n(self) -> int:
        return len(self.su_positions)

    def transmitter(self, source: Source) -> TransmitterProfile:
        return self.pu if Source(source) is Source.PU else self.attacker

    def distances(self, source: Source) -> np.ndarray:
        """Distance from every SU to the chosen transmitter."""
        p = self.transmitter(source).position
        return np.hypot(self.su_positions[:, 0] - p.x, self.su_positions[:, 1] - p.y)

    def with_attacker_sigma2(self, sigma2: float) -> Topology:
        attacker = TransmitterProfile(self.attacker.position, self.attacker.tx_power, sigma2)
        return Topology(self.su_positions, self.pu, attacker, self.placement, self.d_pu_attacker)


@dataclass(frozen=True)
class SlotReport:
    slot_id: int
    energies_db: np.ndarray
    source: Source = field(default=Source.PU)


def _substream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, purpose])


def generate_topology(
    n: int,
    placement: Placement | str,
    d: float,
    seed: int,
    *,
    region: float = 100.0,
    pu_power: float = 10.0,
    pu_sigma2: float = 8.0,
    attacker_power: float = 10.0,
    attacker_sigma2: float = 8.0,
    outside_pu: tuple[float, float] = (150.0, 150.0),
    channel: ChannelParams | None = None,
) -> Topology:
    """Place ``n`` SUs uniformly in ``[0, region]^2`` plus a PU and an attacker.

    SU and PU positions come from substreams that do not depend on ``d``, so
    topologies built with the same seed share SUs and PU and differ only in
    where the attacker sits.

    Inside placement draws the PU uniformly in the region and puts the attacker
    ``d`` away in a uniformly random direction, redrawing the direction until
    it lands inside.  Outside placement fixes the PU at ``outside_pu`` and moves
    the attacker ``d`` units along the line toward the region centre.
    """
    if n < 2:
        raise ValueError(f"need at least 2 SUs, got {n}")
    if not d > 0:
        raise ValueError(f"PU-attacker distance must be > 0, got {d}")
    if not region > 0:
        raise ValueError(f"region extent must be > 0, got {region}")
    placement = Placement(placement)
    channel = channel or ChannelParams()
    floor = channel.min_distance

    su_rng = _substream(seed, 0)
    sus = su_rng.uniform(0.0, region, size=(n, 2))
    for _ in range(MAX_PLACEMENT_TRIES):
        _, first = np.unique(sus, axis=0, return_index=True)
        if len(first) == n:
            break
        dup = np.setdiff1d(np.arange(n), first)
        sus[dup] = su_rng.uniform(0.0, region, size=(len(dup), 2))
    else:
        raise TopologyError("could not place distinct SU positions")

    def clear_of_sus(x: float, y: float) -> bool:
        return bool(np.min(np.hypot(sus[:, 0] - x, sus[:, 1] - y)) >= floor)

    if placement is Placement.INSIDE:
        pu_rng = _substream(seed, 1)
        for _ in range(MAX_PLACEMENT_TRIES):
            px, py = pu_rng.uniform(0.0, region, size=2)
            if clear_of_sus(px, py):
                break
        else:
            raise TopologyError("could not place the PU clear of every SU")
        att_rng = _substream(seed, 2)
        for _ in range(MAX_PLACEMENT_TRIES):
            theta = att_rng.uniform(0.0, 2.0 * math.pi)
            ax, ay = px + d * math.cos(theta), py + d * math.sin(theta)
            if 0.0 <= ax <= region and 0.0 <= ay <= region and clear_of_sus(ax, ay):
                break
        else:
            raise TopologyError(
                f"no attacker position at distance {d} from the PU fits inside the region"
            )
    else:
        px, py = outside_pu
        cx = cy = region / 2.0
        span = math.hypot(cx - px, cy - py)
        if span == 0:
            raise TopologyError("outside PU sits on the region centre")
        ax, ay = px + d * (cx - px) / span, py + d * (cy - py) / span
        if not (clear_of_sus(px, py) and clear_of_sus(ax, ay)):
            raise TopologyError("a transmitter lies within min_distance of an SU")

    sus.setflags(write=False)
    pu = TransmitterProfile(Position(float(px), float(py)), pu_power, pu_sigma2)
    attacker = TransmitterProfile(Position(float(ax), float(ay)), attacker_power, attacker_sigma2)
    return Topology(sus, pu, attacker, placement, float(d))


def received_energy_db(
    tx: TransmitterProfile,
    r: float,
    ch: ChannelParams,
    rng: np.random.Generator | None = None,
    *,
    beta: float | None = None,
) -> float:
    """Received energy in dB at distance ``r``; pass ``beta`` to pin the shadowing draw."""
    if r < ch.min_distance:
        raise ValueError(f"distance {r} is below the floor {ch.min_distance}")
    if beta is None:
        if rng is None:
            raise ValueError("need an rng or an explicit beta")
        beta = math.sqrt(tx.sigma2) * rng.standard_normal()
    return 10.0 * math.log10(tx.tx_power * r ** (-ch.alpha) * math.exp(DB_SCALE * beta))


def mean_energy_db(tx: TransmitterProfile, r: np.ndarray, ch: ChannelParams) -> np.ndarray:
    """Shadowing-free received energy in dB."""
    r = np.asarray(r, dtype=float)
    if np.any(r < ch.min_distance):
        raise ValueError(f"distance below the floor {ch.min_distance}")
    return 10.0 * math.log10(tx.tx_power) - 10.0 * ch.alpha * np.log10(r)


_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def standard_normals(seed: int, stream: int, slot_ids: np.ndarray, n: int) -> np.ndarray:
    """Counter-based N(0, 1) draws of shape ``(len(slot_ids), n)``."""
    with np.errstate(over="ignore"):
        key = _splitmix64(_splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) ^ np.uint64(stream))
        slots = np.asarray(slot_ids, dtype=np.uint64)[:, None]
        sus = np.arange(n, dtype=np.uint64)[None, :]
        base = _splitmix64(_splitmix64(key ^ slots) ^ (sus << np.uint64(1)))
        h1 = _splitmix64(base)
        h2 = _splitmix64(base ^ np.uint64(1))
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53  # (0, 1]
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * 2.0**-53  # [0, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)


def simulate_energies(
    topology: Topology,
    source: Source | str,
    num_slots: int,
    ch: ChannelParams,
    seed: int,
    *,
    first_slot: int = 0,
) -> np.ndarray:
    """Matrix of received energies in dB, one row per slot and one column per SU."""
    if num_slots < 1:
        raise ValueError(f"num_slots must be >= 1, got {num_slots}")
    source = Source(source)
    tx = topology.transmitter(source)
    mean_db = mean_energy_db(tx, topology.distances(source), ch)
    slots = np.arange(first_slot, first_slot + num_slots)
    z = standard_normals(seed, _STREAM_TAG[source], slots, topology.n)
    return mean_db[None, :] + math.sqrt(tx.sigma2) * z


def simulate_slots(
    topology: Topology,
    source: Source | str,
    num_slots: int,
    ch: ChannelParams,
    seed: int,
) -> list[SlotReport]:
    source = Source(source)
    energies = simulate_energies(topology, source, num_slots, ch, seed)
    return [SlotReport(i, row, source) for i, row in enumerate(energies)]
