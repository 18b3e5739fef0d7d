"""Per-time-step orchestration of every algorithm on per-node value states.

This is the reference implementation: one immutable :class:`NodeState` per
node and one pairwise fusion call per received message. Rounds are
synchronous; every node reads the round-start snapshot of its transmitting
in-neighbors and folds them in ascending id order. ``engine`` runs the same
protocols on stacked arrays for the Monte Carlo harness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .belief import GaussianBelief, MotionModel, SensorModel, predict, update
from .errors import ProtocolError
from .fusion import (
    FusionStats,
    centralized_step,
    ci_pairwise_optimal,
    ci_uniform_fuse,
    primex_pairwise_fuse,
)
from .ic_codes import (
    InformationCode,
    PrimeIndexAllocator,
    allocate_indices,
    extend,
    has_new_bits,
    ic_increment,
    ic_score,
    window_truncate,
)
from .network import NetworkGraph, in_neighbors

SENSOR = "sensor"
COMMUNICATION = "communication"

ALGORITHMS = ("cf", "ci-uw", "ci-ow", "primex-c", "primex-c-et", "primex-g", "primex-g-et")
DISTRIBUTED = ALGORITHMS[1:]


@dataclass(frozen=True, eq=False)
class NodeState:
    belief: GaussianBelief
    ic: InformationCode
    reference_ic: InformationCode
    role: str
    sensor_rank: int | None = None

    def __post_init__(self) -> None:
        if self.role not in (SENSOR, COMMUNICATION):
            raise ProtocolError(f"unknown role {self.role!r}")
        if (self.role == SENSOR) != (self.sensor_rank is not None):
            raise ProtocolError("sensor nodes, and only sensor nodes, carry a sensor rank")
        if self.ic.length != self.reference_ic.length:
            raise ProtocolError("information code and reference code lengths differ")


@dataclass(frozen=True)
class RoundLog:
    k: int
    l: int
    transmitters: tuple[int, ...]
    fusions: int


@dataclass(frozen=True)
class ProtocolConfig:
    rounds: int = 7
    gate_first_round: bool = False
    exact_product_when_disjoint: bool = False


def uses_event_trigger(algorithm: str) -> bool:
    return algorithm.endswith("-et")


def initial_states(graph: NetworkGraph, prior: GaussianBelief) -> list[NodeState]:
    """Every node starts from the shared prior, whose code is the single bit 0."""
    ic = InformationCode([1])
    ref = InformationCode.zeros(1)
    states = []
    for i in range(graph.node_count):
        rank = graph.sensor_rank.get(i)
        role = SENSOR if rank is not None else COMMUNICATION
        states.append(NodeState(prior, ic, ref, role, rank))
    return states


def local_step(
    state: NodeState,
    k: int,
    measurement,
    motion: MotionModel,
    sensor: SensorModel,
    allocator: PrimeIndexAllocator,
) -> NodeState:
    """Predict, grow the codes for time ``k`` and, on sensors, absorb ``measurement``.

    ``allocator`` must already be advanced to ``k``. At ``k == 1`` the
    belief is the shared predicted prior and is not propagated again.
    """
    if allocator.current_time != k:
        raise ProtocolError(f"allocator is at time {allocator.current_time}, not {k}")
    belief = predict(state.belief, motion) if k > 1 else state.belief
    ic = extend(state.ic, allocator.sensor_count)
    ref = extend(state.reference_ic, allocator.sensor_count)
    if state.role == SENSOR:
        if measurement is None:
            raise ProtocolError(f"sensor rank {state.sensor_rank} received no measurement at k={k}")
        belief = update(belief, measurement, sensor)
        ic = ic.with_bit(allocator.position(allocator.index(state.sensor_rank, k), ic.length))
    elif measurement is not None:
        raise ProtocolError("communication nodes do not take measurements")
    return replace(
        state,
        belief=belief,
        ic=window_truncate(ic, allocator),
        reference_ic=window_truncate(ref, allocator),
    )


def event_gate(state: NodeState, l: int, *, gate_first_round: bool = False) -> tuple[bool, NodeState]:
    """Decide whether ``state`` transmits in round ``l``; a transmission resets the reference."""
    if l < 1:
        raise ValueError("rounds are numbered from 1")
    transmit = True if (l == 1 and not gate_first_round) else has_new_bits(state.ic, state.reference_ic)
    if transmit:
        return True, replace(state, reference_ic=state.ic)
    return False, state


def _gate_all(
    states: Sequence[NodeState], l: int, event_trigger: bool, config: ProtocolConfig
) -> tuple[list[bool], list[NodeState]]:
    if not event_trigger:
        return [True] * len(states), list(states)
    flags, gated = [], []
    for s in states:
        t, s2 = event_gate(s, l, gate_first_round=config.gate_first_round)
        flags.append(t)
        gated.append(s2)
    return flags, gated


def consensus_round(
    states: Sequence[NodeState],
    graph: NetworkGraph,
    l: int,
    config: ProtocolConfig,
    *,
    event_trigger: bool = True,
    k: int = 0,
    stats: FusionStats | None = None,
) -> tuple[list[NodeState], RoundLog]:
    """Every node folds in all transmitting in-neighbors, lowest id first."""
    transmit, states = _gate_all(states, l, event_trigger, config)
    snapshot = [(s.belief, s.ic) for s in states]
    out, fusions = [], 0
    for i, s in enumerate(states):
        cur = (s.belief, s.ic)
        for j in in_neighbors(graph, i):
            if not transmit[j]:
                continue
            if cur[1] != snapshot[j][1]:
                fusions += 1
            cur = primex_pairwise_fuse(
                cur,
                snapshot[j],
                exact_product_when_disjoint=config.exact_product_when_disjoint,
                stats=stats,
            )
        out.append(replace(s, belief=cur[0], ic=cur[1]))
    return out, RoundLog(k, l, tuple(i for i, t in enumerate(transmit) if t), fusions)


def gossip_round(
    states: Sequence[NodeState],
    graph: NetworkGraph,
    l: int,
    config: ProtocolConfig,
    *,
    event_trigger: bool = True,
    k: int = 0,
    stats: FusionStats | None = None,
) -> tuple[list[NodeState], RoundLog]:
    """Every node fuses once with the transmitting in-neighbor offering most fresh bits."""
    transmit, states = _gate_all(states, l, event_trigger, config)
    snapshot = [(s.belief, s.ic) for s in states]
    out, fusions = [], 0
    for i, s in enumerate(states):
        best, best_score = None, 0
        for j in in_neighbors(graph, i):
            if not transmit[j]:
                continue
            score = ic_score(ic_increment(snapshot[j][1], s.ic))
            if score > best_score:
                best, best_score = j, score
        if best is None:
            out.append(s)
            continue
        fusions += 1
        belief, ic = primex_pairwise_fuse(
            (s.belief, s.ic),
            snapshot[best],
            exact_product_when_disjoint=config.exact_product_when_disjoint,
            stats=stats,
        )
        out.append(replace(s, belief=belief, ic=ic))
    return out, RoundLog(k, l, tuple(i for i, t in enumerate(transmit) if t), fusions)


def ci_uniform_round(
    states: Sequence[NodeState], graph: NetworkGraph, l: int, *, k: int = 0
) -> tuple[list[NodeState], RoundLog]:
    snapshot = [s.belief for s in states]
    out, fusions = [], 0
    for i, s in enumerate(states):
        nbrs = in_neighbors(graph, i)
        fusions += len(nbrs)
        out.append(replace(s, belief=ci_uniform_fuse(s.belief, [snapshot[j] for j in nbrs])))
    return out, RoundLog(k, l, tuple(range(len(states))), fusions)


def ci_optimal_round(
    states: Sequence[NodeState], graph: NetworkGraph, l: int, *, k: int = 0
) -> tuple[list[NodeState], RoundLog]:
    snapshot = [s.belief for s in states]
    out, fusions = [], 0
    for i, s in enumerate(states):
        b = s.belief
        for j in in_neighbors(graph, i):
            b = ci_pairwise_optimal(b, snapshot[j])
            fusions += 1
        out.append(replace(s, belief=b))
    return out, RoundLog(k, l, tuple(range(len(states))), fusions)


def run_time_step(
    states: Sequence[NodeState],
    graph: NetworkGraph,
    algorithm: str,
    k: int,
    measurements: Mapping[int, np.ndarray],
    config: ProtocolConfig,
    allocator: PrimeIndexAllocator,
    motion: MotionModel,
    sensor: SensorModel,
    stats: FusionStats | None = None,
) -> tuple[list[NodeState], PrimeIndexAllocator, list[RoundLog]]:
    """Advance every node through time step ``k`` under ``algorithm``.

    ``measurements`` maps sensor node id -> measurement vector. For ``cf`` all
    nodes carry the single centralized belief and no rounds are run.
    """
    if algorithm not in ALGORITHMS:
        raise ProtocolError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    allocator, _ = allocate_indices(allocator, k)
    if algorithm == "cf":
        # all nodes hold the same centralized belief
        ordered = sorted(measurements.items(), key=lambda item: graph.sensor_rank[item[0]])
        central = centralized_step(
            states[0].belief, [(z, sensor) for _, z in ordered], motion if k > 1 else None
        )
    states = [
        local_step(s, k, measurements.get(i) if s.role == SENSOR else None, motion, sensor, allocator)
        for i, s in enumerate(states)
    ]

    if algorithm == "cf":
        union = states[0].ic
        for s in states[1:]:
            union = InformationCode._wrap(np.maximum(union.bits, s.ic.bits))
        return [replace(s, belief=central, ic=union) for s in states], allocator, []

    logs = []
    et = uses_event_trigger(algorithm)
    for l in range(1, config.rounds + 1):
        if algorithm == "ci-uw":
            states, log = ci_uniform_round(states, graph, l, k=k)
        elif algorithm == "ci-ow":
            states, log = ci_optimal_round(states, graph, l, k=k)
        elif algorithm.startswith("primex-c"):
            states, log = consensus_round(states, graph, l, config, event_trigger=et, k=k, stats=stats)
        else:
            states, log = gossip_round(states, graph, l, config, event_trigger=et, k=k, stats=stats)
        logs.append(log)
    return states, allocator, logs
