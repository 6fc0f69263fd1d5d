"""Airport virtual-queue departure coordination scenario.

Each airline chooses which subset of its eligible flights to push back this
epoch. Released flights join their runway's queue and pay a queue delay;
every flight pays a shared taxiway congestion penalty that kicks in above a
release-count threshold, and heavily late flights pay quadratically in their
schedule lateness. Airlines minimize class-weighted delay over their own
fleet; the coordinator tracks the unweighted total.

Flights held back this epoch wait at the gate: their delay term is one epoch
of holding instead of a queue delay, and their lateness term is evaluated one
epoch later (holding makes the flight later). The queue model itself only
defines delay for released flights, so this holding rule is what makes fleet
costs total over all flights; pricing the lateness growth is also what
preserves the incentive to release, since with the standing queues in this
scenario a pure gate-wait would always undercut the runway queue. Held
flights still share the congestion penalty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from .game import BudgetExceededError, FiniteGame, joint_space_size

__all__ = [
    "AircraftClass",
    "DEFAULT_CLASS_WEIGHTS",
    "Flight",
    "MAX_FLIGHTS_PER_AIRLINE",
    "VQInstance",
    "action_space",
    "airline_cost",
    "build_game",
    "congestion_penalty",
    "fcfs_profile",
    "flight_delay_cost",
    "generate_instance",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "pushback_counts",
    "queue_delay",
    "released_flights",
    "save_instance",
    "system_cost",
    "truncated_lateness",
]


class AircraftClass(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    HEAVY = "heavy"


# Draw order for random class assignment.
_CLASS_ORDER = (AircraftClass.SMALL, AircraftClass.MEDIUM, AircraftClass.HEAVY)

DEFAULT_CLASS_WEIGHTS = {
    AircraftClass.HEAVY: 1.2,
    AircraftClass.MEDIUM: 1.0,
    AircraftClass.SMALL: 0.75,
}
DEFAULT_SERVICE_RATES = (2.0, 2.0)
DEFAULT_INITIAL_QUEUES = (3, 4)
DEFAULT_EPOCH_MINUTES = 4.0
DEFAULT_CONGESTION_THRESHOLD = 4
DEFAULT_LATENESS_THRESHOLD = 10.0
DEFAULT_LATENESS_SCALE = 10.0

# Subset action spaces above this fleet size are refused (2^m actions).
MAX_FLIGHTS_PER_AIRLINE = 20


@dataclass(frozen=True)
class Flight:
    id: int
    runway: int
    aircraft_class: AircraftClass
    lateness: float


@dataclass(frozen=True)
class VQInstance:
    """One departure epoch: runways, eligible flights, and airline ownership."""

    service_rates: tuple[float, ...]
    initial_queues: tuple[int, ...]
    flights: tuple[Flight, ...]
    airlines: tuple[tuple[int, ...], ...]
    epoch_minutes: float = DEFAULT_EPOCH_MINUTES
    congestion_threshold: int = DEFAULT_CONGESTION_THRESHOLD
    lateness_threshold: float = DEFAULT_LATENESS_THRESHOLD
    class_weights: dict | None = None

    def __post_init__(self):
        rates = tuple(float(r) for r in self.service_rates)
        queues = tuple(int(q) for q in self.initial_queues)
        if not rates or any(r <= 0 for r in rates):
            raise ValueError("service rates must be positive, one per runway")
        if len(queues) != len(rates) or any(q < 0 for q in queues):
            raise ValueError("initial queues must be nonnegative, one per runway")
        object.__setattr__(self, "service_rates", rates)
        object.__setattr__(self, "initial_queues", queues)

        flights = tuple(self.flights)
        ids = [f.id for f in flights]
        if len(set(ids)) != len(ids):
            raise ValueError("flight ids must be unique")
        for f in flights:
            if not 0 <= f.runway < len(rates):
                raise ValueError(f"flight {f.id} assigned to unknown runway {f.runway}")
            if f.lateness < 0:
                raise ValueError(f"flight {f.id} has negative lateness")
        object.__setattr__(self, "flights", flights)

        airlines = tuple(tuple(sorted(int(i) for i in owned)) for owned in self.airlines)
        owned_ids = [fid for owned in airlines for fid in owned]
        if any(not owned for owned in airlines):
            raise ValueError("every airline must own at least one flight")
        if sorted(owned_ids) != sorted(ids):
            raise ValueError("airlines must partition the flight set")
        object.__setattr__(self, "airlines", airlines)

        weights = dict(DEFAULT_CLASS_WEIGHTS if self.class_weights is None else self.class_weights)
        weights = {AircraftClass(k): float(v) for k, v in weights.items()}
        if set(weights) != set(AircraftClass) or any(w < 0 for w in weights.values()):
            raise ValueError("class_weights needs one nonnegative weight per aircraft class")
        object.__setattr__(self, "class_weights", weights)

    @property
    def num_runways(self) -> int:
        return len(self.service_rates)

    @property
    def num_airlines(self) -> int:
        return len(self.airlines)

    @property
    def num_flights(self) -> int:
        return len(self.flights)

    @cached_property
    def flight_by_id(self) -> dict:
        return {f.id: f for f in self.flights}

    @cached_property
    def owner_of(self) -> dict:
        """flight id -> (airline index, bit position in its subset encoding)."""
        out = {}
        for i, owned in enumerate(self.airlines):
            for bit, fid in enumerate(owned):
                out[fid] = (i, bit)
        return out

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(2 ** len(owned) for owned in self.airlines)


def truncated_lateness(rng: np.random.Generator, scale: float = DEFAULT_LATENESS_SCALE) -> float:
    """One schedule-lateness draw: N(0, scale^2) resampled until nonnegative."""
    while True:
        value = rng.normal(0.0, scale)
        if value >= 0.0:
            return float(value)


def generate_instance(
    num_flights: int,
    num_airlines: int,
    seed,
    *,
    service_rates=DEFAULT_SERVICE_RATES,
    initial_queues=DEFAULT_INITIAL_QUEUES,
    epoch_minutes: float = DEFAULT_EPOCH_MINUTES,
    congestion_threshold: int = DEFAULT_CONGESTION_THRESHOLD,
    lateness_threshold: float = DEFAULT_LATENESS_THRESHOLD,
    class_weights=None,
    lateness_scale: float = DEFAULT_LATENESS_SCALE,
) -> VQInstance:
    """Randomly generate one epoch instance, deterministic under the seed.

    Per flight (in id order): lateness from the truncated Gaussian, runway
    uniform, class uniform. Airline ownership is drawn uniformly and then
    repaired so every airline owns at least one flight: while some airline is
    empty, the currently largest airline (lowest index on ties) hands its
    highest-id flight to the lowest-index empty airline.
    """
    if num_airlines < 1 or num_flights < num_airlines:
        raise ValueError("need num_flights >= num_airlines >= 1")
    rng = np.random.default_rng(seed)
    num_runways = len(service_rates)
    flights = []
    for fid in range(num_flights):
        lateness = truncated_lateness(rng, lateness_scale)
        runway = int(rng.integers(num_runways))
        klass = _CLASS_ORDER[int(rng.integers(len(_CLASS_ORDER)))]
        flights.append(Flight(fid, runway, klass, lateness))

    owners = rng.integers(num_airlines, size=num_flights)
    counts = np.bincount(owners, minlength=num_airlines)
    while (counts == 0).any():
        empty = int(np.argmax(counts == 0))
        donor = int(np.argmax(counts))
        moved = int(np.nonzero(owners == donor)[0].max())
        owners[moved] = empty
        counts[donor] -= 1
        counts[empty] += 1
    airlines = tuple(
        tuple(int(fid) for fid in np.nonzero(owners == i)[0]) for i in range(num_airlines)
    )
    return VQInstance(
        service_rates=tuple(service_rates),
        initial_queues=tuple(initial_queues),
        flights=tuple(flights),
        airlines=airlines,
        epoch_minutes=epoch_minutes,
        congestion_threshold=congestion_threshold,
        lateness_threshold=lateness_threshold,
        class_weights=class_weights,
    )


def action_space(instance: VQInstance, airline: int, *, max_flights: int = MAX_FLIGHTS_PER_AIRLINE):
    """All subsets of the airline's fleet, in binary counting order.

    Bit j of the action index selects the airline's j-th flight in id order,
    so action 0 is the empty release and the last action releases everything.
    """
    owned = instance.airlines[airline]
    if len(owned) > max_flights:
        raise BudgetExceededError(
            f"airline {airline} owns {len(owned)} flights; cap is {max_flights}"
        )
    return [
        tuple(fid for bit, fid in enumerate(owned) if action >> bit & 1)
        for action in range(2 ** len(owned))
    ]


def _validate_joint_action(instance: VQInstance, joint_action) -> tuple[int, ...]:
    coords = tuple(int(a) for a in joint_action)
    counts = instance.action_counts
    if len(coords) != len(counts):
        raise ValueError(f"joint action has {len(coords)} parts for {len(counts)} airlines")
    for a, m in zip(coords, counts):
        if not 0 <= a < m:
            raise ValueError(f"action index {a} out of range [0, {m})")
    return coords


def released_flights(instance: VQInstance, joint_action) -> tuple[int, ...]:
    """Ids of all flights released under the joint action, ascending."""
    coords = _validate_joint_action(instance, joint_action)
    out = []
    for action, owned in zip(coords, instance.airlines):
        out.extend(fid for bit, fid in enumerate(owned) if action >> bit & 1)
    return tuple(sorted(out))


def pushback_counts(instance: VQInstance, joint_action) -> np.ndarray:
    """Number of released flights per runway."""
    counts = np.zeros(instance.num_runways, dtype=int)
    for fid in released_flights(instance, joint_action):
        counts[instance.flight_by_id[fid].runway] += 1
    return counts


def congestion_penalty(instance: VQInstance, joint_action) -> float:
    """Quadratic penalty on releases beyond the congestion threshold."""
    total = len(released_flights(instance, joint_action))
    return float(max(0, total - instance.congestion_threshold) ** 2)


def queue_delay(instance: VQInstance, joint_action, flight_id: int) -> float:
    """Queue delay in minutes for a flight released under the joint action."""
    if flight_id not in set(released_flights(instance, joint_action)):
        raise ValueError(f"flight {flight_id} is not released under this joint action")
    flight = instance.flight_by_id[flight_id]
    counts = pushback_counts(instance, joint_action)
    r = flight.runway
    queue = instance.initial_queues[r] + int(counts[r])
    return queue / instance.service_rates[r] * instance.epoch_minutes


def _lateness_term(instance: VQInstance, lateness: float) -> float:
    if lateness > instance.lateness_threshold:
        return lateness ** 2
    return lateness


def flight_delay_cost(instance: VQInstance, joint_action, flight_id: int) -> float:
    """Per-flight delay cost: lateness term + queue delay + shared congestion.

    A held flight waits out the epoch instead: its delay term is one epoch of
    gate holding and its lateness term is evaluated one epoch later.
    """
    flight = instance.flight_by_id[flight_id]
    if flight_id in set(released_flights(instance, joint_action)):
        delay = queue_delay(instance, joint_action, flight_id)
        lateness = _lateness_term(instance, flight.lateness)
    else:
        delay = instance.epoch_minutes
        lateness = _lateness_term(instance, flight.lateness + instance.epoch_minutes)
    return lateness + delay + congestion_penalty(instance, joint_action)


def airline_cost(instance: VQInstance, joint_action, airline: int) -> float:
    """Class-weighted delay cost over the airline's whole fleet."""
    total = 0.0
    for fid in instance.airlines[airline]:
        flight = instance.flight_by_id[fid]
        total += instance.class_weights[flight.aircraft_class] * flight_delay_cost(
            instance, joint_action, fid
        )
    return total


def system_cost(instance: VQInstance, joint_action) -> float:
    """Unweighted total delay cost over all flights."""
    return sum(flight_delay_cost(instance, joint_action, f.id) for f in instance.flights)


def fcfs_profile(instance: VQInstance) -> tuple[int, ...]:
    """Uncoordinated baseline: every airline releases its whole fleet."""
    return tuple(m - 1 for m in instance.action_counts)


def build_game(instance: VQInstance, *, joint_space_cap: int = 2 ** 24):
    """Lower the instance to a FiniteGame plus the coordinator's cost table.

    Returns ``(game, sys_cost)`` where agent i's cost table is its
    class-weighted fleet delay and ``sys_cost[k]`` is the unweighted total at
    flat joint index k. Tables are built on the full action grid, vectorized
    per flight.
    """
    counts = instance.action_counts
    if joint_space_size(counts) > joint_space_cap:
        raise BudgetExceededError(
            f"joint space of size {joint_space_size(counts)} exceeds the cap of {joint_space_cap}"
        )
    shape = counts
    n = instance.num_airlines

    def along_axis(vector, axis):
        out_shape = [1] * n
        out_shape[axis] = vector.size
        return vector.reshape(out_shape)

    # per-runway pushback counts and total releases over the whole grid
    per_runway = []
    for r in range(instance.num_runways):
        acc = np.zeros(shape)
        for i, owned in enumerate(instance.airlines):
            local = np.zeros(counts[i])
            actions = np.arange(counts[i])
            for bit, fid in enumerate(owned):
                if instance.flight_by_id[fid].runway == r:
                    local += (actions >> bit) & 1
            acc = acc + along_axis(local, i)
        per_runway.append(acc)
    total_released = sum(per_runway)
    congestion = np.maximum(0.0, total_released - instance.congestion_threshold) ** 2
    delay_by_runway = [
        (instance.initial_queues[r] + per_runway[r]) / instance.service_rates[r]
        * instance.epoch_minutes
        for r in range(instance.num_runways)
    ]

    agent_costs = [np.zeros(shape) for _ in range(n)]
    sys_costs = np.zeros(shape)
    for flight in instance.flights:  # ascending id, matching the scalar path
        i, bit = instance.owner_of[flight.id]
        released = along_axis(((np.arange(counts[i]) >> bit) & 1).astype(bool), i)
        lat_released = _lateness_term(instance, flight.lateness)
        lat_held = _lateness_term(instance, flight.lateness + instance.epoch_minutes)
        cost = np.where(released, lat_released + delay_by_runway[flight.runway],
                        lat_held + instance.epoch_minutes) + congestion
        agent_costs[i] += instance.class_weights[flight.aircraft_class] * cost
        sys_costs += cost

    game = FiniteGame(
        action_counts=counts,
        costs=np.stack([grid.reshape(-1) for grid in agent_costs]),
    )
    return game, sys_costs.reshape(-1)


# --- JSON serialization -----------------------------------------------------
#
# Mirrors the scenario config plus the generated flights, so an instance can
# be replayed exactly:
#   {"runways": {"count": R, "mu": [...], "q0": [...]},
#    "epoch_minutes": ..., "thresholds": {"congestion": ..., "lateness": ...},
#    "weights": {"heavy": ..., "medium": ..., "small": ...},
#    "flights": [{"id", "runway", "class", "lateness"}, ...],
#    "airlines": [[flight ids] per airline]}


def instance_to_dict(instance: VQInstance) -> dict:
    return {
        "runways": {
            "count": instance.num_runways,
            "mu": list(instance.service_rates),
            "q0": list(instance.initial_queues),
        },
        "epoch_minutes": instance.epoch_minutes,
        "thresholds": {
            "congestion": instance.congestion_threshold,
            "lateness": instance.lateness_threshold,
        },
        "weights": {k.value: v for k, v in instance.class_weights.items()},
        "flights": [
            {"id": f.id, "runway": f.runway, "class": f.aircraft_class.value,
             "lateness": f.lateness}
            for f in instance.flights
        ],
        "airlines": [list(owned) for owned in instance.airlines],
    }


def instance_from_dict(doc: dict) -> VQInstance:
    runways = doc["runways"]
    if int(runways["count"]) != len(runways["mu"]):
        raise ValueError("'runways.count' disagrees with the length of 'runways.mu'")
    thresholds = doc.get("thresholds", {})
    return VQInstance(
        service_rates=tuple(runways["mu"]),
        initial_queues=tuple(runways["q0"]),
        flights=tuple(
            Flight(int(f["id"]), int(f["runway"]), AircraftClass(f["class"]),
                   float(f["lateness"]))
            for f in doc["flights"]
        ),
        airlines=tuple(tuple(owned) for owned in doc["airlines"]),
        epoch_minutes=float(doc.get("epoch_minutes", DEFAULT_EPOCH_MINUTES)),
        congestion_threshold=int(thresholds.get("congestion", DEFAULT_CONGESTION_THRESHOLD)),
        lateness_threshold=float(thresholds.get("lateness", DEFAULT_LATENESS_THRESHOLD)),
        class_weights=doc.get("weights"),
    )


def save_instance(instance: VQInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")


def load_instance(path) -> VQInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))
