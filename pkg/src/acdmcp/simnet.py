"""Deterministic discrete-event radio simulation.

Time is integer microseconds on a single heap ordered by (time, sequence).
Every transmission is a physical broadcast: each in-range receiver flips an
independent per-link coin (or always hears it when `reliable_control` is on
and the message is control traffic). All randomness comes from per-purpose
streams derived from the run seed, so a run is a pure function of its
configuration.

The driver owns three responsibilities the nodes cannot: the global
re-clustering trigger (a head's alarm broadcast is globalized after a short
delay, matching a flooded wake-up call without simulating the flood), the
energy ledger that independently mirrors every node's own energy arithmetic
and must agree bit-for-bit, and the bookkeeping that decides which report
origins count toward delivery statistics (only nodes with a complete
forwarding path at the round boundary; transport losses after that count
against delivery honestly).
"""

from __future__ import annotations

import hashlib
import heapq
import math
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .baseline import baseline_params, baseline_step, make_baseline_node
from .messages import BROADCAST, Message, MsgKind, Power, SINK_ID
from .protocol import (
    EmitMetric,
    EnergyAlarm,
    EnergyParams,
    MICROS,
    MsgIn,
    NodeState,
    NodeStatus,
    ProtocolParams,
    Recluster,
    Send,
    SetTimer,
    SinkState,
    Start,
    StatusChange,
    TimerFired,
    TimerKind,
    make_node,
    sink_step,
    step,
)
from .rng import derive_seed, stream

PROPAGATION_DELAY = 1  # microseconds from antenna to antenna
RECLUSTER_GLOBAL_DELAY = 10_000  # alarm broadcast to network-wide phase reset
MAX_RECLUSTERS = 50
DEFAULT_MAX_TIME = 4 * 3600 * MICROS
DISCONNECT_THRESHOLD = 0.5

CLUSTERING_KINDS = frozenset(
    {
        MsgKind.NDM,
        MsgKind.CHCV_SHARE,
        MsgKind.STATS_SHARE,
        MsgKind.ICH,
        MsgKind.CJN,
        MsgKind.SCJ,
        MsgKind.TCMO,
        MsgKind.TCJN,
        MsgKind.RECLUSTER,
    }
)
SINK_INTEREST = frozenset(
    {MsgKind.FCHICC, MsgKind.FLPNICC, MsgKind.ACK, MsgKind.DATA}
)


class SimulationError(Exception):
    pass


# ---- topology -------------------------------------------------------------------


class LinkModel:
    """Immutable-by-convention radio graph: node positions, initial energies,
    and directed per-power delivery probabilities."""

    def __init__(
        self,
        positions: dict[int, tuple[float, float]],
        energies: dict[int, float],
        links: dict[tuple[int, int, Power], float],
    ):
        if SINK_ID not in positions:
            raise SimulationError("topology must include the sink (id 0)")
        self.positions = dict(positions)
        self.energies = dict(energies)
        self.links = dict(links)
        adj: dict[tuple[int, Power], list[tuple[int, float]]] = {}
        for (src, dst, power), lam in links.items():
            adj.setdefault((src, power), []).append((dst, lam))
        self._adj = {key: tuple(sorted(pairs)) for key, pairs in adj.items()}

    def sensor_ids(self) -> list[int]:
        return sorted(nid for nid in self.positions if nid != SINK_ID)

    def receivers(self, src: int, power: Power) -> tuple[tuple[int, float], ...]:
        return self._adj.get((src, power), ())

    def low_degree(self, nid: int) -> int:
        return len(self.receivers(nid, Power.LOW))

    def export_text(self) -> str:
        lines = ["# topology v1"]
        for nid in sorted(self.positions):
            x, y = self.positions[nid]
            e = self.energies.get(nid, 0.0)
            lines.append(f"node {nid} {x!r} {y!r} {e!r}")
        for src, dst, power in sorted(
            self.links, key=lambda k: (k[0], k[1], k[2].value)
        ):
            lam = self.links[(src, dst, power)]
            lines.append(f"edge {src} {dst} {power.value} {lam!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse_text(cls, text: str) -> "LinkModel":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "# topology v1":
            raise SimulationError("not a v1 topology file")
        positions: dict[int, tuple[float, float]] = {}
        energies: dict[int, float] = {}
        links: dict[tuple[int, int, Power], float] = {}
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "node" and len(parts) == 5:
                nid = int(parts[1])
                positions[nid] = (float(parts[2]), float(parts[3]))
                energies[nid] = float(parts[4])
            elif parts[0] == "edge" and len(parts) == 5:
                power = Power(parts[3])
                links[(int(parts[1]), int(parts[2]), power)] = float(parts[4])
            else:
                raise SimulationError(f"unparseable topology line: {ln!r}")
        return cls(positions, energies, links)

    def content_hash(self) -> str:
        return hashlib.sha256(self.export_text().encode()).hexdigest()


def generate_topology(
    n_nodes: int,
    seed: int,
    initial_energy: float,
    area_per_node: float = 400.0,
    range_low: float = 30.0,
    range_high: float = 75.0,
    lam_min: float = 0.5,
    lam_max: float = 1.0,
) -> LinkModel:
    """Density-preserving random layout: the area grows with the node count so
    the mean degree stays put. The sink sits at the center. Directed link
    probabilities are drawn independently per (src, dst, power)."""
    rng = stream(seed, "topology")
    side = math.sqrt(n_nodes * area_per_node)
    positions = {SINK_ID: (side / 2.0, side / 2.0)}
    energies = {SINK_ID: 0.0}  # the sink is mains-powered; value unused
    for nid in range(1, n_nodes + 1):
        positions[nid] = (rng.uniform(0.0, side), rng.uniform(0.0, side))
        energies[nid] = initial_energy
    links: dict[tuple[int, int, Power], float] = {}
    ids = sorted(positions)
    for src in ids:
        sx, sy = positions[src]
        for dst in ids:
            if dst == src:
                continue
            dx, dy = positions[dst]
            dist = math.hypot(sx - dx, sy - dy)
            if dist <= range_low:
                links[(src, dst, Power.LOW)] = rng.uniform(lam_min, lam_max)
            if dist <= range_high:
                links[(src, dst, Power.HIGH)] = rng.uniform(lam_min, lam_max)
    return LinkModel(positions, energies, links)


# ---- configuration ---------------------------------------------------------------


PROTOCOLS = ("acdmcp", "baseline")


@dataclass
class SimConfig:
    protocol: str = "acdmcp"
    n_nodes: int = 25
    seed: int = 1
    area_per_node: float = 400.0
    range_low: float = 30.0
    range_high: float = 75.0
    lam_min: float = 0.5
    lam_max: float = 1.0
    reliable_control: bool = False
    mac_data_retries: int = 2  # link-layer ARQ attempts beyond the first, unicast data only
    energy: EnergyParams = field(default_factory=EnergyParams)
    protocol_params: ProtocolParams = field(default_factory=ProtocolParams)
    rounds: Optional[int] = None
    until_disconnect: bool = False
    max_time: Optional[int] = None
    # one round number or a sequence of them; each fires a recluster call once
    forced_recluster_at_round: Optional[object] = None

    def forced_rounds(self) -> frozenset:
        if self.forced_recluster_at_round is None:
            return frozenset()
        if isinstance(self.forced_recluster_at_round, int):
            return frozenset((self.forced_recluster_at_round,))
        return frozenset(self.forced_recluster_at_round)

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.range_low <= 0 or self.range_high < self.range_low:
            raise ValueError("need 0 < range_low <= range_high")
        if not (0.0 <= self.lam_min <= self.lam_max <= 1.0):
            raise ValueError("need 0 <= lam_min <= lam_max <= 1")
        if self.area_per_node <= 0:
            raise ValueError("area_per_node must be positive")
        if self.rounds is None and not self.until_disconnect and self.max_time is None:
            raise ValueError("no termination condition: set rounds, until_disconnect or max_time")
        if self.rounds is not None and self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.mac_data_retries < 0:
            raise ValueError("mac_data_retries must be >= 0")
        if any(not isinstance(r, int) or r < 1 for r in self.forced_rounds()):
            raise ValueError("forced_recluster_at_round takes round numbers >= 1")
        self.energy.validate()
        self.protocol_params.validate()


# ---- event log --------------------------------------------------------------------

LOG_HEADER = "# eventlog v1"


class EventLog:
    """Append-only run record with a line-oriented, versioned text form.
    Row: (time, kind, src, peers, msg, flag, power)."""

    def __init__(self):
        self.rows: list[tuple] = []

    def add(
        self,
        time: int,
        kind: str,
        src: int,
        peers: tuple = (),
        msg: str = "",
        flag: str = "",
        power: str = "",
    ) -> None:
        self.rows.append((time, kind, src, peers, msg, flag, power))

    def export_text(self) -> str:
        out = [LOG_HEADER]
        for time, kind, src, peers, msg, flag, power in self.rows:
            peer_txt = ",".join(str(p) for p in peers)
            out.append(f"{time}\t{kind}\t{src}\t{peer_txt}\t{msg}\t{flag}\t{power}")
        return "\n".join(out) + "\n"

    @classmethod
    def parse_text(cls, text: str) -> "EventLog":
        lines = text.splitlines()
        if not lines or lines[0] != LOG_HEADER:
            raise SimulationError("not a v1 event log")
        log = cls()
        for ln in lines[1:]:
            if not ln:
                continue
            time, kind, src, peer_txt, msg, flag, power = ln.split("\t")
            peers = tuple(int(p) for p in peer_txt.split(",")) if peer_txt else ()
            log.rows.append((int(time), kind, int(src), peers, msg, flag, power))
        return log

    def count(self, kind: str) -> int:
        return sum(1 for row in self.rows if row[1] == kind)


# ---- run metrics ------------------------------------------------------------------


@dataclass
class MetricsRecord:
    protocol: str
    n_nodes: int
    seed: int
    if_label: str
    dtsr: Optional[float]
    msgs_generated: int
    msgs_at_sink: int
    control_low: int
    control_high: int
    data_tx: int
    clustering_msgs_by_epoch: list
    alive_at_epoch: list
    ch_count_by_epoch: list
    consistency_by_epoch: list
    epochs: int
    rounds_completed: int
    first_death_time: Optional[int]
    disconnect_time: Optional[int]
    end_time: int
    end_reason: str
    wall_seconds: float

    @property
    def control_total(self) -> int:
        return self.control_low + self.control_high

    @property
    def consistency_ratio(self) -> float:
        return min(self.consistency_by_epoch) if self.consistency_by_epoch else 1.0


@dataclass
class SimResult:
    config: SimConfig
    record: MetricsRecord
    log: EventLog
    final_states: dict
    sink_acks: dict
    topology_hash: str
    violations: list
    counters: dict


# ---- structural checks --------------------------------------------------------------


def compute_consistency(states: dict, alive: set) -> float:
    """Fraction of alive members whose upward pointer is reciprocated."""
    total = consistent = 0
    for nid in alive:
        st = states[nid]
        if st.status is NodeStatus.CM and st.my_ch is not None:
            total += 1
            head = states.get(st.my_ch)
            if (
                st.my_ch in alive
                and head is not None
                and head.status in (NodeStatus.CH, NodeStatus.SNCH)
                and nid in head.members
            ):
                consistent += 1
        elif st.status is NodeStatus.TCM and st.my_tch is not None:
            total += 1
            up = states.get(st.my_tch)
            if (
                st.my_tch in alive
                and up is not None
                and up.status in (NodeStatus.CM, NodeStatus.TCM)
                and nid in up.subs
            ):
                consistent += 1
    return consistent / total if total else 1.0


def check_invariants(
    states: dict, alive: set, strict: bool, recluster_pending: bool
) -> list[str]:
    """Structural soundness of a settled epoch. In strict mode (loss-free
    control plane) stale pointers are failures; under loss they are expected
    and only cycles, bad terminals and threshold breaches count."""
    bad: list[str] = []
    for nid in sorted(alive):
        st = states[nid]
        if st.status in (NodeStatus.UC, NodeStatus.CHC):
            bad.append(f"node {nid} left in transient status {st.status.value}")
        if st.status is NodeStatus.CM and st.my_ch is None:
            bad.append(f"member {nid} has no head pointer")
        if st.status is NodeStatus.TCM and st.my_tch is None:
            bad.append(f"transitive member {nid} has no upward pointer")
        if st.status is NodeStatus.CH and st.e_re <= st.e_th and not recluster_pending:
            bad.append(f"head {nid} serving below its energy threshold")
    # upward chains terminate at a head without cycling
    for nid in sorted(alive):
        st = states[nid]
        if st.status not in (NodeStatus.CM, NodeStatus.TCM):
            continue
        seen = {nid}
        cur = st
        while cur.status in (NodeStatus.CM, NodeStatus.TCM):
            up = cur.parent()
            if up is None or up not in states:
                break
            if up in seen:
                bad.append(f"membership cycle through node {nid}")
                break
            if up not in alive:
                break  # broken by a death, not by the protocol
            seen.add(up)
            cur = states[up]
    if strict:
        for nid in sorted(alive):
            st = states[nid]
            if st.status is NodeStatus.CM and st.my_ch in alive:
                head = states[st.my_ch]
                if head.status not in (NodeStatus.CH, NodeStatus.SNCH):
                    bad.append(f"member {nid} points at non-head {st.my_ch}")
                elif nid not in head.members:
                    bad.append(f"head {st.my_ch} does not list member {nid}")
            if st.status is NodeStatus.TCM and st.my_tch in alive:
                up = states[st.my_tch]
                if up.status not in (NodeStatus.CM, NodeStatus.TCM):
                    bad.append(f"transitive member {nid} points at {st.my_tch} which is not a member")
                elif nid not in up.subs:
                    bad.append(f"node {st.my_tch} does not list sub-member {nid}")
    # downstream forests: strictly decreasing hop counts toward the sink
    for nid in sorted(alive):
        st = states[nid]
        if st.dsn_high is not None and st.dsn_high != SINK_ID and st.dsn_high in alive:
            down = states[st.dsn_high]
            if st.hts is not None and down.hts is not None and not down.hts < st.hts:
                bad.append(f"high-power hop count does not decrease from {nid} to {st.dsn_high}")
        if st.dsn_low is not None and st.dsn_low != SINK_ID and st.dsn_low in alive:
            down = states[st.dsn_low]
            if (
                st.hts_lp is not None
                and down.hts_lp is not None
                and not down.hts_lp < st.hts_lp
            ):
                bad.append(f"low-power hop count does not decrease from {nid} to {st.dsn_low}")
    return bad


# ---- the driver -------------------------------------------------------------------


class Simulation:
    def __init__(self, config: SimConfig, topology: Optional[LinkModel] = None):
        config.validate()
        self.config = config
        self.params = (
            baseline_params(config.protocol_params)
            if config.protocol == "baseline"
            else config.protocol_params
        )
        self.topo = topology or generate_topology(
            config.n_nodes,
            config.seed,
            config.energy.initial,
            config.area_per_node,
            config.range_low,
            config.range_high,
            config.lam_min,
            config.lam_max,
        )
        self.sensors = self.topo.sensor_ids()
        mean_initial = sum(self.topo.energies[n] for n in self.sensors) / len(self.sensors)
        e_th0 = (
            self.params.e_th_initial
            if self.params.e_th_initial is not None
            else 0.2 * mean_initial
        )
        self.step_fn: Callable = baseline_step if config.protocol == "baseline" else step
        make = make_baseline_node if config.protocol == "baseline" else make_node
        self.states: dict[int, NodeState] = {}
        self.ledger: dict[int, float] = {}
        for nid in self.sensors:
            energy = replace(config.energy, initial=self.topo.energies[nid])
            self.states[nid] = make(
                nid, self.params, energy, derive_seed(config.seed, f"node:{nid}"), e_th0
            )
            self.ledger[nid] = energy.initial
        self.sink = SinkState(params=self.params, rng=derive_seed(config.seed, "node:0"))
        self.loss_control = stream(config.seed, "loss_control")
        self.loss_data = stream(config.seed, "loss_data")

        self.heap: list = []
        self._seq = 0
        self.now = 0
        self.alive: set[int] = set(self.sensors)
        self.log = EventLog()
        self.epoch = 0
        self.recluster_count = 0
        self._recluster_pending = False
        self._alarmed: set[int] = set()
        self.next_round = 1
        self.rounds_completed = 0
        self._forced_done: set[int] = set()
        self.current_connected: set[int] = set()
        self.generated_ids: set = set()
        self.delivered_ids: set = set()
        self.msgs_generated = 0
        self.msgs_at_sink = 0
        self.control_low = 0
        self.control_high = 0
        self.data_tx = 0
        self.clustering_by_epoch: dict[int, int] = {0: 0}
        self.alive_at_epoch: list[int] = [len(self.alive)]
        self.ch_count_by_epoch: list[int] = []
        self.consistency_by_epoch: list[float] = []
        self.violations: list[str] = []
        self.counters: dict[str, int] = {}
        self.first_death_time: Optional[int] = None
        self.disconnect_time: Optional[int] = None
        self.end_reason: Optional[str] = None
        self.anomalous_deliveries = 0

    # -- scheduling helpers

    def _push(self, when: int, tag: str, payload: tuple) -> None:
        heapq.heappush(self.heap, (when, self._seq, tag, payload))
        self._seq += 1

    def _max_time(self) -> int:
        return self.config.max_time if self.config.max_time is not None else DEFAULT_MAX_TIME

    # -- run loop

    def run(self) -> SimResult:
        started = _time.perf_counter()
        self.log.add(0, "phase", -1, msg="start", flag="0")
        self._dispatch_sink(Start(0), 0)
        for nid in self.sensors:
            self._dispatch_node(nid, Start(0), 0)
        self._push(self.params.t_form_rel, "formation", (self.epoch,))
        self._push(self.params.t_data_rel, "boundary", (self.epoch, self.next_round))
        while self.heap and self.end_reason is None:
            when, _, tag, payload = heapq.heappop(self.heap)
            if when > self._max_time():
                self.now = self._max_time()
                self._end("max_time")
                break
            self.now = when
            if tag == "timer":
                nid, stamp, kind, tpayload = payload
                if nid not in self.alive or self.states[nid].epoch != stamp:
                    continue
                self._dispatch_node(nid, TimerFired(kind, when, tpayload), when)
            elif tag == "sink_timer":
                stamp, kind, tpayload = payload
                if stamp == self.sink.epoch:
                    self._dispatch_sink(TimerFired(kind, when, tpayload), when)
            elif tag == "tx":
                src, send = payload
                self._transmit(src, send, when)
            elif tag == "deliver":
                dst, msg, power, dest = payload
                self._deliver(dst, msg, power, dest, when)
            elif tag == "alarm":
                nid, stamp = payload
                if nid in self.alive and self.states[nid].epoch == stamp:
                    self._dispatch_node(nid, EnergyAlarm(when), when)
            elif tag == "recluster":
                (reason,) = payload
                self._do_recluster(when, reason)
            elif tag == "formation":
                (stamp,) = payload
                if stamp == self.epoch:
                    self._formation_check(when)
            elif tag == "boundary":
                stamp, round_seq = payload
                if stamp == self.epoch:
                    self._round_boundary(when, round_seq)
        if self.end_reason is None:
            self._end("quiet")
        wall = _time.perf_counter() - started
        return self._result(wall)

    # -- node + sink dispatch

    def _dispatch_node(self, nid: int, event, now: int) -> None:
        prev = self.states[nid]
        new_state, actions = self.step_fn(prev, event)
        self.states[nid] = new_state
        self._audit(nid, event, new_state, actions)
        self._apply_actions(nid, new_state, actions, now)
        if self.ledger[nid] <= 0.0 and nid in self.alive:
            self._death(nid, now)
            return
        if (
            new_state.status is NodeStatus.CH
            and new_state.e_re < new_state.e_th
            and not new_state.recluster_called
            and nid not in self._alarmed
        ):
            self._alarmed.add(nid)
            self._push(now + 1, "alarm", (nid, new_state.epoch))

    def _dispatch_sink(self, event, now: int) -> None:
        self.sink, actions = sink_step(self.sink, event)
        for act in actions:
            if isinstance(act, Send):
                self._push(now + act.delay, "tx", (SINK_ID, act))
            elif isinstance(act, SetTimer):
                self._push(
                    now + act.delay, "sink_timer", (self.sink.epoch, act.kind, act.payload)
                )
            elif isinstance(act, EmitMetric):
                self._metric(SINK_ID, act, now)

    def _audit(self, nid: int, event, new_state: NodeState, actions: list) -> None:
        """Independent mirror of the node's energy arithmetic; exact equality
        is an invariant, not a tolerance check."""
        e = self.ledger[nid]
        energy = new_state.energy
        if isinstance(event, MsgIn):
            e = max(0.0, e - energy.rx)
        elif (
            isinstance(event, TimerFired)
            and event.kind is TimerKind.ROUND_TICK
            and energy.idle_per_round > 0.0
        ):
            e = max(0.0, e - energy.idle_per_round)
        for act in actions:
            if isinstance(act, Send):
                e = max(0.0, e - energy.cost(act.power))
        self.ledger[nid] = e
        if e != new_state.e_re:
            raise SimulationError(
                f"energy audit mismatch at node {nid}: ledger {e!r} vs node {new_state.e_re!r}"
            )

    def _apply_actions(self, nid: int, state: NodeState, actions: list, now: int) -> None:
        for act in actions:
            if isinstance(act, Send):
                self._push(now + act.delay, "tx", (nid, act))
            elif isinstance(act, SetTimer):
                self._push(
                    now + act.delay, "timer", (nid, state.epoch, act.kind, act.payload)
                )
            elif isinstance(act, EmitMetric):
                self._metric(nid, act, now)
            elif isinstance(act, StatusChange):
                pass  # statuses are read from state snapshots when needed

    def _metric(self, nid: int, act: EmitMetric, now: int) -> None:
        name = act.name
        if name == "gen":
            rid = act.value
            if nid in self.current_connected:
                self.generated_ids.add(rid)
                self.msgs_generated += 1
                self.log.add(now, "gen", nid, flag=str(rid[1]))
            return
        if name == "sink_rx":
            rid = act.value
            if rid in self.generated_ids:
                if rid not in self.delivered_ids:
                    self.delivered_ids.add(rid)
                    self.msgs_at_sink += 1
                    self.log.add(now, "sink_rx", rid[0], flag=str(rid[1]))
            else:
                self.anomalous_deliveries += 1
            return
        if name == "recluster_call":
            self.log.add(now, "recluster", nid, flag="call")
            self._schedule_recluster(now + RECLUSTER_GLOBAL_DELAY, "energy")
            return
        self.counters[name] = self.counters.get(name, 0) + 1

    # -- radio

    def _transmit(self, src: int, send: Send, now: int) -> None:
        msg, power = send.msg, send.power
        is_control = msg.kind is not MsgKind.DATA
        delivered = []
        for dst, lam in self.topo.receivers(src, power):
            if dst != SINK_ID and dst not in self.alive:
                continue
            if self.config.reliable_control and is_control:
                ok = True
            else:
                p = lam
                if not is_control and dst == send.dest and self.config.mac_data_retries > 0:
                    # link-layer ARQ toward the addressee; overhearers see raw loss
                    p = 1.0 - (1.0 - lam) ** (self.config.mac_data_retries + 1)
                draw = self.loss_control if is_control else self.loss_data
                ok = draw.random() < p
            if ok:
                delivered.append(dst)
        for dst in delivered:
            self._push(now + PROPAGATION_DELAY, "deliver", (dst, msg, power, send.dest))
        self.log.add(
            now,
            "tx",
            src,
            peers=tuple(delivered),
            msg=msg.kind.name,
            flag="*" if send.dest == BROADCAST else str(send.dest),
            power=power.value,
        )
        if is_control:
            if power is Power.HIGH:
                self.control_high += 1
            else:
                self.control_low += 1
            if msg.kind in CLUSTERING_KINDS:
                self.clustering_by_epoch[self.epoch] = (
                    self.clustering_by_epoch.get(self.epoch, 0) + 1
                )
        else:
            self.data_tx += 1

    def _deliver(self, dst: int, msg: Message, power: Power, dest: int, now: int) -> None:
        if dst == SINK_ID:
            if msg.kind in SINK_INTEREST:
                self._dispatch_sink(MsgIn(msg, power, dest, now), now)
            return
        if dst not in self.alive:
            return
        self._dispatch_node(dst, MsgIn(msg, power, dest, now), now)

    # -- lifecycle

    def _death(self, nid: int, now: int) -> None:
        self.alive.discard(nid)
        self.log.add(now, "death", nid)
        if self.first_death_time is None:
            self.first_death_time = now
        if not self.alive:
            self._end("all_dead")
            return
        st = self.states[nid]
        load_bearing = st.status in (NodeStatus.CH, NodeStatus.SNCH) or st.is_tch
        if not load_bearing:
            for other in self.alive:
                o = self.states[other]
                if o.dsn_high == nid or o.dsn_low == nid or o.parent() == nid:
                    load_bearing = True
                    break
        if load_bearing:
            self._schedule_recluster(now + RECLUSTER_GLOBAL_DELAY, "death")

    def _schedule_recluster(self, when: int, reason: str) -> None:
        if self._recluster_pending or self.end_reason is not None:
            return
        self._recluster_pending = True
        self._push(when, "recluster", (reason,))

    def _do_recluster(self, now: int, reason: str) -> None:
        self._recluster_pending = False
        self.recluster_count += 1
        if self.recluster_count > MAX_RECLUSTERS:
            self._end("recluster_limit")
            return
        self.epoch += 1
        self._alarmed = set()
        self.current_connected = set()
        self.clustering_by_epoch.setdefault(self.epoch, 0)
        self.alive_at_epoch.append(len(self.alive))
        self.log.add(now, "recluster", -1, flag=reason)
        self.log.add(now, "phase", -1, msg="epoch", flag=str(self.epoch))
        event = Recluster(now, self.epoch)
        self._dispatch_sink(event, now)
        for nid in sorted(self.alive):
            self._dispatch_node(nid, event, now)
        self._push(now + self.params.t_form_rel, "formation", (self.epoch,))
        self._push(now + self.params.t_data_rel, "boundary", (self.epoch, self.next_round))

    def _formation_check(self, now: int) -> None:
        ch_count = sum(
            1 for n in self.alive if self.states[n].status is NodeStatus.CH
        )
        self.ch_count_by_epoch.append(ch_count)
        ratio = compute_consistency(self.states, self.alive)
        self.consistency_by_epoch.append(ratio)
        self.log.add(now, "phase", -1, msg="formed", flag=f"{ch_count}")
        self.violations.extend(
            check_invariants(
                self.states,
                self.alive,
                strict=self.config.reliable_control,
                recluster_pending=self._recluster_pending,
            )
        )
        if ch_count == 0:
            contested = any(
                self.states[n].status in (NodeStatus.CM, NodeStatus.TCM)
                or self.states[n].neighbors
                for n in self.alive
            )
            if contested:
                # nobody cleared the energy bar: decay it and try again
                self._schedule_recluster(now + RECLUSTER_GLOBAL_DELAY, "degenerate_retry")

    def _round_boundary(self, now: int, round_seq: int) -> None:
        if self.config.rounds is not None and round_seq > self.config.rounds:
            self._end("rounds")
            return
        if not self.alive:
            self._end("all_dead")
            return
        self.current_connected = self._connected_set()
        ratio = len(self.current_connected) / len(self.alive)
        if ratio < DISCONNECT_THRESHOLD:
            if self.disconnect_time is None:
                self.disconnect_time = now
                self.log.add(now, "disconnect", -1, flag=f"{ratio:.4f}")
            if self.config.until_disconnect:
                self._end("disconnect")
                return
        if round_seq in self.config.forced_rounds() and round_seq not in self._forced_done:
            self._forced_done.add(round_seq)
            self._schedule_recluster(now + RECLUSTER_GLOBAL_DELAY, "forced")
            return
        self.rounds_completed = round_seq
        for nid in sorted(self.alive):
            self._push(
                now, "timer", (nid, self.states[nid].epoch, TimerKind.ROUND_TICK, round_seq)
            )
        self.next_round = round_seq + 1
        self._push(now + self.params.report_period, "boundary", (self.epoch, self.next_round))

    def _connected_set(self) -> set[int]:
        """Origins whose forwarding pointers reach the sink right now.
        Phase 0 walks up the cluster, phase 1 follows inter-cluster hops."""
        states, alive = self.states, self.alive
        reach: dict[tuple[int, int], bool] = {}

        def walk(start: int) -> bool:
            cur, phase = start, 0
            chain: list[tuple[int, int]] = []
            seen: set[tuple[int, int]] = set()
            result = False
            while True:
                key = (cur, phase)
                if cur == SINK_ID:
                    result = True
                    break
                if key in reach:
                    result = reach[key]
                    break
                if cur not in alive or key in seen:
                    break
                seen.add(key)
                chain.append(key)
                st = states[cur]
                if st.status in (NodeStatus.CM, NodeStatus.TCM):
                    nxt = st.parent() if phase == 0 else st.dsn_low
                    nxt_phase = phase
                elif st.status in (NodeStatus.CH, NodeStatus.SNCH):
                    hop = st.next_hop()
                    nxt = hop[0] if hop else None
                    nxt_phase = 1
                else:
                    nxt = None
                    nxt_phase = phase
                if nxt is None:
                    break
                cur, phase = nxt, nxt_phase
            for key in chain:
                reach[key] = result
            return result

        return {nid for nid in alive if walk(nid)}

    def _end(self, reason: str) -> None:
        self.end_reason = reason
        self.log.add(self.now, "end", -1, flag=reason)

    def _result(self, wall: float) -> SimResult:
        dtsr = (
            self.msgs_at_sink / self.msgs_generated if self.msgs_generated > 0 else None
        )
        epochs = self.epoch + 1
        clustering = [self.clustering_by_epoch.get(i, 0) for i in range(epochs)]
        record = MetricsRecord(
            protocol=self.config.protocol,
            n_nodes=self.config.n_nodes,
            seed=self.config.seed,
            if_label=self.params.ifs_election.label(),
            dtsr=dtsr,
            msgs_generated=self.msgs_generated,
            msgs_at_sink=self.msgs_at_sink,
            control_low=self.control_low,
            control_high=self.control_high,
            data_tx=self.data_tx,
            clustering_msgs_by_epoch=clustering,
            alive_at_epoch=list(self.alive_at_epoch),
            ch_count_by_epoch=list(self.ch_count_by_epoch),
            consistency_by_epoch=list(self.consistency_by_epoch),
            epochs=epochs,
            rounds_completed=self.rounds_completed,
            first_death_time=self.first_death_time,
            disconnect_time=self.disconnect_time,
            end_time=self.now,
            end_reason=self.end_reason or "unknown",
            wall_seconds=wall,
        )
        return SimResult(
            config=self.config,
            record=record,
            log=self.log,
            final_states={nid: st.snapshot() for nid, st in sorted(self.states.items())},
            sink_acks=dict(self.sink.ack_heard),
            topology_hash=self.topo.content_hash(),
            violations=list(self.violations),
            counters=dict(self.counters),
        )


def run_sim(config: SimConfig, topology: Optional[LinkModel] = None) -> SimResult:
    return Simulation(config, topology).run()
