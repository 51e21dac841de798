"""Reliability-aware clustering protocol as a pure state machine.

Each node is a NodeState; `step(state, event)` returns a new state plus a
list of actions (sends, timers, metric emissions) and never mutates its
input, so a driver can replay any event sequence bit-for-bit.

An epoch runs: neighbor discovery (n jittered NDM broadcasts) -> competence
share and election -> direct joins (ICH/CJN) -> search-to-join with
transitive offers (SCJ/TCMO/TCJN) -> sink-initiated route discovery at two
power levels (SCHICC/FCHICC and SLPNICC/FLPNICC with block-acks) -> periodic
aggregated reporting. Re-clustering replays the same phases, replacing the
NDM exchange with a traffic-counter share so link estimates incorporate
everything heard since the network started.

Timing is relative: every node schedules its own phase timers from the
shared window parameters, and all jitter comes from a splitmix64 state kept
inside NodeState, which keeps transitions deterministic.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

from .messages import BROADCAST, Message, MsgKind, Power, SINK_ID
from .metric import (
    CandidateProfile,
    EnergyState,
    ImpactFactors,
    chcv_election,
    chcv_join,
    chcv_multihop,
    compute_mlr,
    compute_ndi,
    compute_rei,
    election_key,
    estimate_prr,
    iccom_key,
    join_key,
    transitive_key,
)
from .rng import split_below

MICROS = 1_000_000
MAX_DEPTH_SLOTS = 16  # reporting rounds stagger senders by depth within this many slots


# ---- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class EnergyParams:
    """Initial charge and per-operation costs (abstract units)."""

    initial: float = 100.0
    tx_low: float = 0.01
    tx_high: float = 0.04
    rx: float = 0.01
    idle_per_round: float = 0.0

    def validate(self) -> None:
        if self.initial <= 0:
            raise ValueError(f"initial energy must be positive, got {self.initial}")
        for name in ("tx_low", "tx_high", "rx", "idle_per_round"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tx_high < self.tx_low:
            raise ValueError("tx_high must be >= tx_low")

    def cost(self, power: Power) -> float:
        return self.tx_high if power is Power.HIGH else self.tx_low


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol knobs plus the shared phase timetable (microseconds)."""

    n_broadcasts: int = 10
    ideg: int = 4
    ifs_election: ImpactFactors = field(
        default_factory=lambda: ImpactFactors(if_rei=0.2, if_ndi=0.2, if_link=0.6)
    )
    ifs_multihop: ImpactFactors = field(
        default_factory=lambda: ImpactFactors(
            if_rei=0.17, if_ndi=0.17, if_link=0.51, if_zeta=0.15
        )
    )
    e_th_initial: Optional[float] = None  # resolved to 20% of mean initial energy
    e_th_decay: float = 0.10
    nid_higher_wins: bool = True
    bidirectional_mlr: bool = False
    scj_retry_budget: int = 3
    max_tcm_depth: Optional[int] = None
    id_based: bool = False  # baseline switch: decisions use ids/hops only

    broadcast_span: int = 1 * MICROS
    discovery_window: int = 2 * MICROS
    share_window: int = 2 * MICROS
    offer_window: int = 2 * MICROS
    scj_window: int = 2 * MICROS
    iccom_offer_window: int = 3 * MICROS
    iccom_window: int = 48 * MICROS
    back_window: int = 2 * MICROS
    settle_margin: int = 1 * MICROS
    data_slot: int = 50_000
    report_period: int = 20 * MICROS

    def validate(self) -> None:
        if self.n_broadcasts < 1:
            raise ValueError("n_broadcasts must be >= 1")
        if self.ideg < 1:
            raise ValueError("ideg must be >= 1")
        self.ifs_election.validate_election()
        self.ifs_multihop.validate_multihop()
        if not 0.0 <= self.e_th_decay < 1.0:
            raise ValueError("e_th_decay must be in [0, 1)")
        if self.scj_retry_budget < 0:
            raise ValueError("scj_retry_budget must be >= 0")
        for name in (
            "broadcast_span",
            "discovery_window",
            "share_window",
            "offer_window",
            "scj_window",
            "iccom_offer_window",
            "iccom_window",
            "back_window",
            "settle_margin",
            "data_slot",
            "report_period",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for window in ("discovery_window", "share_window", "offer_window", "scj_window"):
            if getattr(self, window) < self.broadcast_span * 2:
                raise ValueError(f"{window} must be at least twice broadcast_span")
        if self.data_slot * MAX_DEPTH_SLOTS >= self.report_period:
            raise ValueError("data slots must fit inside the report period")

    # phase timetable, relative to the epoch start
    @property
    def t_form_rel(self) -> int:
        return (
            self.discovery_window
            + self.share_window
            + self.offer_window
            + (1 + self.scj_retry_budget) * self.scj_window
            + self.settle_margin
        )

    @property
    def t_iccom_rel(self) -> int:
        return self.t_form_rel

    @property
    def t_back_rel(self) -> int:
        return self.t_iccom_rel + self.iccom_window

    @property
    def t_data_rel(self) -> int:
        return self.t_back_rel + self.back_window + self.settle_margin


# ---- statuses, events, actions -------------------------------------------------


class NodeStatus(Enum):
    UC = "uc"        # uncovered
    CHC = "chc"      # contesting the election
    CM = "cm"        # direct cluster member
    TCM = "tcm"      # transitive cluster member
    CH = "ch"        # cluster head
    SNCH = "snch"    # single-node cluster head


class TimerKind(Enum):
    DISCOVERY_END = "discovery_end"
    STATS_END = "stats_end"
    ELECTION = "election"
    OFFER_END = "offer_end"
    SCJ_END = "scj_end"
    HP_OFFER_END = "hp_offer_end"
    LP_OFFER_END = "lp_offer_end"
    BACK_SEND = "back_send"
    ROUND_TICK = "round_tick"
    DATA_SEND = "data_send"
    SINK_ICCOM = "sink_iccom"
    SINK_BACK = "sink_back"


@dataclass(frozen=True)
class Start:
    now: int


@dataclass(frozen=True)
class Recluster:
    now: int
    epoch: int


@dataclass(frozen=True)
class MsgIn:
    msg: Message
    power: Power
    dest: int
    now: int


@dataclass(frozen=True)
class TimerFired:
    kind: TimerKind
    now: int
    payload: object = None


@dataclass(frozen=True)
class EnergyAlarm:
    now: int


Event = Union[Start, Recluster, MsgIn, TimerFired, EnergyAlarm]


@dataclass(frozen=True)
class Send:
    msg: Message
    power: Power
    dest: int = BROADCAST
    delay: int = 0


@dataclass(frozen=True)
class SetTimer:
    kind: TimerKind
    delay: int
    payload: object = None


@dataclass(frozen=True)
class StatusChange:
    status: NodeStatus


@dataclass(frozen=True)
class EmitMetric:
    name: str
    value: object = 1


Action = Union[Send, SetTimer, StatusChange, EmitMetric]


# ---- per-neighbor bookkeeping ---------------------------------------------------


@dataclass(frozen=True)
class NeighborEntry:
    """Everything a node knows about one peer: cumulative heard counters,
    the peer's latest share claims, and frozen link estimates for the current
    epoch. Immutable; updates go through dataclasses.replace."""

    nid: int
    heard_low: int = 0
    heard_high: int = 0
    seen_epoch: int = 0
    # link estimates frozen at the last epoch boundary
    est_in_low: float = 0.0
    est_out_low: float = 0.0
    est_in_high: float = 0.0
    est_out_high: float = 0.0
    out_known: bool = False
    out_known_high: bool = False
    # cleared when a share-window claim goes missing; such peers survive only
    # as high-power route acquaintances, not as low-ring neighbors
    low_live: bool = True
    # competence share (this epoch)
    adv_e_re: float = 0.0
    adv_degree: int = 0
    adv_mlr: float = 0.0
    adv_epoch: int = -1
    # traffic-counter share claims (this epoch)
    claim_sent_low: int = 0
    claim_sent_high: int = 0
    claim_heard_low: int = 0
    claim_heard_high: int = 0
    claim_epoch: int = -1

    def out_low(self) -> float:
        """Out-link estimate toward this peer; symmetric prior until a claim
        or block-ack pins the real value."""
        return self.est_out_low if self.out_known else self.est_in_low


@dataclass(frozen=True)
class RouteOffer:
    msg: Message
    count: int = 1


# ---- node state -----------------------------------------------------------------


@dataclass
class NodeState:
    nid: int
    params: ProtocolParams
    energy: EnergyParams
    rng: int
    e_re: float
    e_th: float
    status: NodeStatus = NodeStatus.UC
    is_tch: bool = False
    epoch: int = 0

    neighbors: dict = field(default_factory=dict)
    sent_low: int = 0
    sent_high: int = 0
    mlr_in: float = 0.0
    shared: Optional[tuple] = None  # (e_re, degree, mlr_in) as advertised

    my_ch: Optional[int] = None
    my_tch: Optional[int] = None
    depth: int = 0
    members: set = field(default_factory=set)
    subs: set = field(default_factory=set)
    elr_to_ch: float = 1.0
    accepted_offer: Optional[Message] = None

    ich_offers: dict = field(default_factory=dict)
    tcmo_offers: dict = field(default_factory=dict)
    orphan_ids: set = field(default_factory=set)
    scj_tries: int = 0

    schicc_count: int = 0
    slpnicc_count: int = 0
    hp_offers: dict = field(default_factory=dict)
    lp_offers: dict = field(default_factory=dict)
    hp_timer_set: bool = False
    lp_timer_set: bool = False
    dsn_high: Optional[int] = None
    dsn_low: Optional[int] = None
    hts: Optional[int] = None
    hts_lp: Optional[int] = None
    elr_sink_in: float = 0.0
    elr_sink_out: float = 0.0
    elr_lp_in: float = 0.0
    usn_heard: dict = field(default_factory=dict)
    lp_usn_heard: dict = field(default_factory=dict)
    # measured sink-direct out-links, learned from the sink's block-acks and
    # kept across epochs (the sink is not a neighbors[] peer)
    sink_out_high: float = 0.0
    sink_out_known_high: bool = False
    sink_out_low: float = 0.0
    sink_out_known_low: bool = False

    report_buffer: list = field(default_factory=list)
    recluster_called: bool = False

    def clone(self) -> "NodeState":
        new = copy.copy(self)
        new.neighbors = dict(self.neighbors)
        new.members = set(self.members)
        new.subs = set(self.subs)
        new.ich_offers = dict(self.ich_offers)
        new.tcmo_offers = dict(self.tcmo_offers)
        new.orphan_ids = set(self.orphan_ids)
        new.hp_offers = dict(self.hp_offers)
        new.lp_offers = dict(self.lp_offers)
        new.usn_heard = dict(self.usn_heard)
        new.lp_usn_heard = dict(self.lp_usn_heard)
        new.report_buffer = list(self.report_buffer)
        return new

    def low_peers(self) -> list[int]:
        # only peers actually heard at low power count as radio neighbors;
        # high-power overhearing (route discovery) reaches far past that ring
        return [
            nid
            for nid, e in self.neighbors.items()
            if e.heard_low > 0 and e.low_live
        ]

    def degree(self) -> int:
        return len(self.low_peers())

    def parent(self) -> Optional[int]:
        """Upward pointer inside the cluster (None for heads)."""
        if self.status is NodeStatus.TCM:
            return self.my_tch
        if self.status is NodeStatus.CM:
            return self.my_ch
        return None

    def next_hop(self) -> Optional[tuple[int, Power]]:
        """Inter-cluster next hop for a head: direct low-power sink first,
        then the high-power overlay, then a low-power gateway."""
        if self.dsn_low == SINK_ID:
            return (SINK_ID, Power.LOW)
        if self.dsn_high is not None:
            return (self.dsn_high, Power.HIGH)
        if self.dsn_low is not None:
            return (self.dsn_low, Power.LOW)
        return None

    def snapshot(self) -> dict:
        """Inspection view used by the driver, metrics and tests."""
        return {
            "nid": self.nid,
            "status": self.status.value,
            "is_tch": self.is_tch,
            "e_re": self.e_re,
            "e_th": self.e_th,
            "epoch": self.epoch,
            "degree": self.degree(),
            "mlr_in": self.mlr_in,
            "shared": self.shared,
            "my_ch": self.my_ch,
            "my_tch": self.my_tch,
            "depth": self.depth,
            "members": sorted(self.members),
            "subs": sorted(self.subs),
            "elr_to_ch": self.elr_to_ch,
            "dsn_high": self.dsn_high,
            "dsn_low": self.dsn_low,
            "hts": self.hts,
            "hts_lp": self.hts_lp,
            "elr_sink_in": self.elr_sink_in,
            "elr_sink_out": self.elr_sink_out,
            "sent_low": self.sent_low,
            "sent_high": self.sent_high,
            "neighbors": {
                nid: {
                    "heard_low": e.heard_low,
                    "heard_high": e.heard_high,
                    "est_in_low": e.est_in_low,
                    "est_out_low": e.est_out_low,
                    "est_in_high": e.est_in_high,
                    "est_out_high": e.est_out_high,
                    "out_known": e.out_known,
                    "out_known_high": e.out_known_high,
                    "low_live": e.low_live,
                    "seen_epoch": e.seen_epoch,
                }
                for nid, e in sorted(self.neighbors.items())
            },
        }


def make_node(
    nid: int,
    params: ProtocolParams,
    energy: EnergyParams,
    seed: int,
    e_th: float,
) -> NodeState:
    if nid == SINK_ID:
        raise ValueError("node id 0 is reserved for the sink")
    return NodeState(
        nid=nid, params=params, energy=energy, rng=seed, e_re=energy.initial, e_th=e_th
    )


# ---- shared helpers --------------------------------------------------------------


def _jitter(st: NodeState, span: int) -> int:
    st.rng, value = split_below(st.rng, span)
    return value


def _send(
    st: NodeState,
    actions: list,
    msg: Message,
    power: Power,
    dest: int = BROADCAST,
    delay: int = 0,
) -> None:
    if st.e_re <= 0.0:
        return
    st.e_re = max(0.0, st.e_re - st.energy.cost(power))
    if power is Power.HIGH:
        st.sent_high += 1
    else:
        st.sent_low += 1
    actions.append(Send(msg, power, dest, delay))


def _set_status(st: NodeState, actions: list, status: NodeStatus) -> None:
    if st.status is not status:
        st.status = status
        actions.append(StatusChange(status))
    st.is_tch = bool(st.subs) and st.status in (NodeStatus.CM, NodeStatus.TCM)


def _entry(st: NodeState, nid: int) -> NeighborEntry:
    entry = st.neighbors.get(nid)
    if entry is None:
        entry = NeighborEntry(nid=nid)
    return entry


def record_hearing(st: NodeState, msg: Message, power: Power) -> None:
    """Cumulative per-peer reception counters; every reception lands here so
    re-clustering can estimate links from operational traffic."""
    if msg.src == SINK_ID:
        return
    entry = _entry(st, msg.src)
    if power is Power.HIGH:
        entry = replace(entry, heard_high=entry.heard_high + 1, seen_epoch=st.epoch)
    else:
        entry = replace(
            entry, heard_low=entry.heard_low + 1, seen_epoch=st.epoch, low_live=True
        )
    st.neighbors[msg.src] = entry


def begin_discovery(st: NodeState, actions: list) -> None:
    """Epoch-one entry: n jittered neighbor-discovery broadcasts, then close
    the window."""
    p = st.params
    for _ in range(p.n_broadcasts):
        _send(
            st,
            actions,
            Message(kind=MsgKind.NDM, src=st.nid),
            Power.LOW,
            delay=_jitter(st, p.broadcast_span),
        )
    actions.append(SetTimer(TimerKind.DISCOVERY_END, p.discovery_window))


def _freeze_epoch_estimates(st: NodeState) -> None:
    """Fix this epoch's link estimates. Epoch one divides discovery counts by
    n; later epochs divide cumulative counters by the peer's claimed totals
    and drop peers that stayed silent through the counter-share window."""
    p = st.params
    if st.epoch == 0:
        for nid, e in list(st.neighbors.items()):
            est = estimate_prr(e.heard_low, p.n_broadcasts)
            st.neighbors[nid] = replace(e, est_in_low=est)
        return
    for nid, e in list(st.neighbors.items()):
        if e.claim_epoch != st.epoch:
            # silent through the share window: presumed gone from the low
            # ring. The entry itself stays: a single lost share frame must not
            # wipe the cumulative counters (hearing the peer again revives it),
            # and high-power route knowledge lives outside claim reach anyway.
            st.neighbors[nid] = replace(e, low_live=False)
            continue
        est_in_low = estimate_prr(e.heard_low, e.claim_sent_low)
        est_in_high = estimate_prr(e.heard_high, e.claim_sent_high)
        est_out_low = estimate_prr(e.claim_heard_low, st.sent_low)
        # a node that never transmitted at high power has no out sample there;
        # keep whatever a block-ack pinned earlier rather than zeroing it
        if st.sent_high > 0:
            est_out_high = estimate_prr(e.claim_heard_high, st.sent_high)
            known_high = True
        else:
            est_out_high = e.est_out_high
            known_high = e.out_known_high
        st.neighbors[nid] = replace(
            e,
            est_in_low=est_in_low,
            est_in_high=est_in_high,
            est_out_low=est_out_low,
            est_out_high=est_out_high,
            out_known=True,
            out_known_high=known_high,
            low_live=True,
        )


def _clear_epoch_state(st: NodeState) -> None:
    st.mlr_in = 0.0
    st.shared = None
    st.my_ch = None
    st.my_tch = None
    st.depth = 0
    st.members = set()
    st.subs = set()
    st.is_tch = False
    st.elr_to_ch = 1.0
    st.accepted_offer = None
    st.ich_offers = {}
    st.tcmo_offers = {}
    st.orphan_ids = set()
    st.scj_tries = 0
    st.schicc_count = 0
    st.slpnicc_count = 0
    st.hp_offers = {}
    st.lp_offers = {}
    st.hp_timer_set = False
    st.lp_timer_set = False
    st.dsn_high = None
    st.dsn_low = None
    st.hts = None
    st.hts_lp = None
    st.elr_sink_in = 0.0
    st.elr_sink_out = 0.0
    st.elr_lp_in = 0.0
    st.usn_heard = {}
    st.lp_usn_heard = {}
    st.report_buffer = []
    st.recluster_called = False


def _neighbor_link_sample(st: NodeState) -> list[float]:
    # high-power-only acquaintances are not part of the low-power neighborhood
    low = [e for e in st.neighbors.values() if e.heard_low > 0 and e.low_live]
    values = [e.est_in_low for e in low]
    if st.params.bidirectional_mlr:
        values += [e.out_low() for e in low]
    return values


# ---- election --------------------------------------------------------------------


def _begin_election(st: NodeState, actions: list) -> None:
    """Shared tail of the discovery / counter-share windows: freeze link
    estimates, compute the mean in-link reliability, and either contest (share
    the competence triple) or wait for announcements."""
    p = st.params
    _freeze_epoch_estimates(st)
    if st.degree() == 0:
        _set_status(st, actions, NodeStatus.SNCH)
        return
    st.mlr_in = compute_mlr(_neighbor_link_sample(st))
    if st.e_re > st.e_th:
        _set_status(st, actions, NodeStatus.CHC)
        st.shared = (st.e_re, st.degree(), st.mlr_in)
        _send(
            st,
            actions,
            Message(
                kind=MsgKind.CHCV_SHARE,
                src=st.nid,
                e_re=st.shared[0],
                degree=st.shared[1],
                mlr_in=st.shared[2],
            ),
            Power.LOW,
            delay=_jitter(st, p.broadcast_span),
        )
    actions.append(SetTimer(TimerKind.ELECTION, p.share_window))


def _scored_election_candidate(
    st: NodeState, nid: int, e_re: float, degree: int, mlr: float
) -> tuple[CandidateProfile, float]:
    rei = compute_rei(EnergyState(e_re, st.e_th))
    ndi = compute_ndi(degree, st.params.ideg)
    score = chcv_election(rei, ndi, mlr, st.params.ifs_election)
    return (CandidateProfile(nid, e_re, degree, mlr), score)


def run_election(st: NodeState, actions: list, now: int) -> None:
    """Close of the competence-share window. A contestant that outranks every
    contesting neighbor declares itself head and announces; everyone else
    reverts to uncovered and waits for announcements."""
    p = st.params
    if st.status is NodeStatus.CHC:
        mine = _scored_election_candidate(st, st.nid, *st.shared)
        best = mine
        for nid, e in st.neighbors.items():
            if e.adv_epoch != st.epoch:
                continue  # not contesting (below threshold or silent)
            cand = _scored_election_candidate(st, nid, e.adv_e_re, e.adv_degree, e.adv_mlr)
            if election_key(cand[0], cand[1], p.ideg, p.nid_higher_wins) > election_key(
                best[0], best[1], p.ideg, p.nid_higher_wins
            ):
                best = cand
        if best is mine:
            _set_status(st, actions, NodeStatus.CH)
            st.depth = 0
            st.elr_to_ch = 1.0
            _send(
                st,
                actions,
                Message(
                    kind=MsgKind.ICH,
                    src=st.nid,
                    e_re=st.shared[0],
                    degree=st.shared[1],
                    mlr_in=st.shared[2],
                ),
                Power.LOW,
                delay=_jitter(st, p.broadcast_span),
            )
            return
        _set_status(st, actions, NodeStatus.UC)
    if st.status is NodeStatus.UC:
        actions.append(SetTimer(TimerKind.OFFER_END, p.offer_window))


# ---- joining ---------------------------------------------------------------------


def _join_offer_scored(st: NodeState, msg: Message) -> tuple[CandidateProfile, float]:
    """Score a direct offer: the head's REI and NDI plus the out-link toward
    it (symmetric prior in epoch one)."""
    rei = compute_rei(EnergyState(msg.e_re, st.e_th))
    ndi = compute_ndi(msg.degree, st.params.ideg)
    lr_out = _entry(st, msg.src).out_low()
    score = chcv_join(rei, ndi, lr_out, st.params.ifs_election)
    return (CandidateProfile(msg.src, msg.e_re, msg.degree, lr_out), score)


def _accept_direct(st: NodeState, actions: list, msg: Message) -> None:
    cand, _ = _join_offer_scored(st, msg)
    _set_status(st, actions, NodeStatus.CM)
    st.my_ch = msg.src
    st.my_tch = None
    st.depth = 1
    st.elr_to_ch = cand.link_term
    st.accepted_offer = msg
    st.ich_offers = {}
    st.tcmo_offers = {}
    _send(
        st,
        actions,
        Message(kind=MsgKind.CJN, src=st.nid, chosen=msg.src),
        Power.LOW,
        delay=_jitter(st, st.params.broadcast_span // 2),
    )


def _best_direct_offer(st: NodeState) -> Optional[Message]:
    best_msg, best_key = None, None
    for msg in st.ich_offers.values():
        cand, score = _join_offer_scored(st, msg)
        key = join_key(cand, score, st.params.ideg, st.params.nid_higher_wins)
        if best_key is None or key > best_key:
            best_msg, best_key = msg, key
    return best_msg


def _begin_scj(st: NodeState, actions: list) -> None:
    st.scj_tries += 1
    _send(
        st,
        actions,
        Message(kind=MsgKind.SCJ, src=st.nid),
        Power.LOW,
        delay=_jitter(st, st.params.broadcast_span // 2),
    )
    actions.append(SetTimer(TimerKind.SCJ_END, st.params.scj_window))


def handle_ich(st: NodeState, actions: list, msg: Message, now: int) -> None:
    """Head announcement: buffered while choosing, trigger for head-conflict
    resolution, or a cluster-switch opportunity for an already-joined member."""
    p = st.params
    if st.status is NodeStatus.CH:
        # two heads in range of each other: the loser reverts and rejoins
        mine = _scored_election_candidate(st, st.nid, *st.shared)
        theirs = _scored_election_candidate(st, msg.src, msg.e_re, msg.degree, msg.mlr_in)
        if election_key(theirs[0], theirs[1], p.ideg, p.nid_higher_wins) > election_key(
            mine[0], mine[1], p.ideg, p.nid_higher_wins
        ):
            actions.append(EmitMetric("ch_conflict_demoted"))
            _set_status(st, actions, NodeStatus.UC)
            st.members = set()
            st.ich_offers = {msg.src: msg}
            actions.append(SetTimer(TimerKind.OFFER_END, p.offer_window))
        return
    if st.status in (NodeStatus.UC, NodeStatus.CHC):
        st.ich_offers[msg.src] = msg
        return
    if st.status is NodeStatus.CM and msg.src != st.my_ch:
        # adaptive switch on a strictly better direct offer
        cand, score = _join_offer_scored(st, msg)
        cur, cur_score = _join_offer_scored(st, st.accepted_offer)
        if join_key(cand, score, p.ideg, p.nid_higher_wins) > join_key(
            cur, cur_score, p.ideg, p.nid_higher_wins
        ):
            actions.append(EmitMetric("cluster_switch"))
            _accept_direct(st, actions, msg)


def handle_offer_end(st: NodeState, actions: list, now: int) -> None:
    """Close of the direct-offer window: join the best head or start searching."""
    if st.status is not NodeStatus.UC:
        return
    best = _best_direct_offer(st)
    if best is not None:
        _accept_direct(st, actions, best)
        return
    _begin_scj(st, actions)


def handle_scj_and_tcmo(st: NodeState, actions: list, event: Event) -> None:
    """Search-to-join traffic: heads answer searchers with unicast offers,
    members answer with transitive offers; the searcher's window close picks
    direct offers first, then the best transitive chain, else retries."""
    p = st.params
    if isinstance(event, MsgIn):
        msg = event.msg
        if msg.kind is MsgKind.SCJ:
            if st.status is NodeStatus.CH:
                _send(
                    st,
                    actions,
                    Message(
                        kind=MsgKind.ICH,
                        src=st.nid,
                        e_re=st.shared[0] if st.shared else st.e_re,
                        degree=st.degree(),
                        mlr_in=st.mlr_in,
                    ),
                    Power.LOW,
                    dest=msg.src,
                    delay=_jitter(st, p.broadcast_span // 2),
                )
            elif st.status in (NodeStatus.CM, NodeStatus.TCM):
                hops = st.depth + 1
                if p.max_tcm_depth is not None and hops > p.max_tcm_depth:
                    return
                elr = _entry(st, msg.src).est_in_low * st.elr_to_ch
                _send(
                    st,
                    actions,
                    Message(
                        kind=MsgKind.TCMO,
                        src=st.nid,
                        e_re=st.e_re,
                        degree=st.degree(),
                        link_term=elr,
                        hops=hops,
                    ),
                    Power.LOW,
                    dest=msg.src,
                    delay=_jitter(st, p.broadcast_span // 2),
                )
            return
        if msg.kind is MsgKind.TCMO:
            if st.status is NodeStatus.UC:
                st.tcmo_offers[msg.src] = msg
            return
        if msg.kind is MsgKind.TCJN:
            if msg.chosen == st.nid and st.status in (NodeStatus.CM, NodeStatus.TCM):
                st.subs.add(msg.src)
                st.is_tch = True
                actions.append(EmitMetric("tch_marked"))
            elif msg.src in st.subs and msg.chosen != st.nid:
                st.subs.discard(msg.src)
                st.is_tch = bool(st.subs)
            return
        return
    # SCJ window close
    if st.status is not NodeStatus.UC:
        return
    best = _best_direct_offer(st)
    if best is not None:
        _accept_direct(st, actions, best)
        return
    best_msg, best_key = None, None
    for msg in st.tcmo_offers.values():
        rei = compute_rei(EnergyState(msg.e_re, st.e_th))
        ndi = compute_ndi(msg.degree, p.ideg)
        score = chcv_multihop(rei, ndi, msg.link_term, msg.hops, p.ifs_multihop)
        cand = CandidateProfile(msg.src, msg.e_re, msg.degree, msg.link_term, msg.hops)
        key = transitive_key(cand, score, p.ideg, p.nid_higher_wins)
        if best_key is None or key > best_key:
            best_msg, best_key = msg, key
    if best_msg is not None:
        _set_status(st, actions, NodeStatus.TCM)
        st.my_tch = best_msg.src
        st.my_ch = None
        st.depth = best_msg.hops
        st.elr_to_ch = best_msg.link_term
        st.tcmo_offers = {}
        st.ich_offers = {}
        _send(
            st,
            actions,
            Message(kind=MsgKind.TCJN, src=st.nid, chosen=best_msg.src),
            Power.LOW,
            delay=_jitter(st, p.broadcast_span // 2),
        )
        return
    if st.scj_tries <= p.scj_retry_budget:
        _begin_scj(st, actions)
        return
    _set_status(st, actions, NodeStatus.SNCH)  # exhausted: single-node cluster


def handle_cjn(st: NodeState, actions: list, msg: Message) -> None:
    """Join notices keep membership marks consistent by overhearing."""
    if st.status in (NodeStatus.CH, NodeStatus.SNCH):
        if msg.chosen == st.nid:
            st.members.add(msg.src)
        elif msg.src in st.members:
            st.members.discard(msg.src)
        return
    if msg.src in st.subs and msg.chosen != st.nid:
        st.subs.discard(msg.src)
        st.is_tch = bool(st.subs)
    if st.status is NodeStatus.CM and msg.src == st.my_ch:
        # the head defected to another cluster: orphaned, search again
        actions.append(EmitMetric("orphaned_by_ch"))
        _set_status(st, actions, NodeStatus.UC)
        st.my_ch = None
        st.depth = 0
        st.accepted_offer = None
        st.scj_tries = 0
        _begin_scj(st, actions)


# ---- inter-cluster route discovery ------------------------------------------------


SINK_ENERGY_SENTINEL = 1e18  # outranks any real node on the energy tiebreak


def _sink_candidate(
    st: NodeState, count: int, hops: int, high: bool
) -> tuple[CandidateProfile, float]:
    if high and st.sink_out_known_high:
        lam = st.sink_out_high
    elif not high and st.sink_out_known_low:
        lam = st.sink_out_low
    else:
        lam = estimate_prr(count, st.params.n_broadcasts)
    score = chcv_multihop(1.0, 1.0, lam, hops, st.params.ifs_multihop)
    return (CandidateProfile(SINK_ID, SINK_ENERGY_SENTINEL, 0, lam, hops), score)


def _route_candidate(
    st: NodeState, offer: RouteOffer, member_based: bool
) -> tuple[CandidateProfile, float]:
    """Score a forwarded route offer. The hearing count estimates the inbound
    link; once block-acks or traffic claims have pinned the outbound link
    toward the offerer (the direction reports will actually travel), that
    measurement takes precedence."""
    msg = offer.msg
    entry = st.neighbors.get(msg.src)
    lam = estimate_prr(offer.count, st.params.n_broadcasts)
    if member_based:
        if entry is not None and entry.out_known_high:
            lam = entry.est_out_high
    elif entry is not None and entry.out_known:
        lam = entry.est_out_low
    elr = lam * msg.link_term
    hops = msg.hops + 1
    rei = compute_rei(EnergyState(msg.e_re, st.e_th))
    fanout = msg.members if member_based else msg.degree
    ndi = compute_ndi(fanout, st.params.ideg)
    score = chcv_multihop(rei, ndi, elr, hops, st.params.ifs_multihop)
    return (CandidateProfile(msg.src, msg.e_re, fanout, elr, hops), score)


def _pick_route(st: NodeState, candidates: list) -> Optional[tuple]:
    """candidates: (profile, score, count). Returns the winner or None.
    Id-based mode ranks by fewer hops then higher id only."""
    if not candidates:
        return None
    if st.params.id_based:
        return max(candidates, key=lambda c: (-c[0].hops, c[0].node_id))
    return max(
        candidates, key=lambda c: iccom_key(c[0], c[1], st.params.nid_higher_wins)
    )


def _emit_fchicc(st: NodeState, actions: list, heard: int) -> None:
    p = st.params
    for _ in range(p.n_broadcasts):
        _send(
            st,
            actions,
            Message(
                kind=MsgKind.FCHICC,
                src=st.nid,
                e_re=st.e_re,
                members=len(st.members),
                link_term=st.elr_sink_in,
                hops=st.hts or 0,
                chosen=st.dsn_high if st.dsn_high is not None else SINK_ID,
                heard=heard,
            ),
            Power.HIGH,
            delay=_jitter(st, p.broadcast_span),
        )


def _emit_flpnicc(st: NodeState, actions: list, heard: int) -> None:
    p = st.params
    for _ in range(p.n_broadcasts):
        _send(
            st,
            actions,
            Message(
                kind=MsgKind.FLPNICC,
                src=st.nid,
                e_re=st.e_re,
                degree=st.degree(),
                link_term=st.elr_lp_in,
                hops=st.hts_lp or 0,
                chosen=st.dsn_low if st.dsn_low is not None else SINK_ID,
                heard=heard,
            ),
            Power.LOW,
            delay=_jitter(st, p.broadcast_span),
        )


def run_iccom(st: NodeState, actions: list, event: Event) -> None:
    """Sink-initiated route formation at both power levels.

    Heads collect the sink's high-power discovery plus forwarded offers,
    choose a downstream neighbor, and forward n times (carrying their heard
    count of the chosen hop as an implicit ack). Ordinary members run the
    low-power leg the same way and relay it so stranded heads can adopt a
    low-power gateway. Block-acks at the end of the window let upstream
    nodes learn their out-link.
    """
    p = st.params
    head = st.status in (NodeStatus.CH, NodeStatus.SNCH)
    member = st.status in (NodeStatus.CM, NodeStatus.TCM)
    if isinstance(event, MsgIn):
        msg = event.msg
        if msg.kind is MsgKind.SCHICC:
            if head and msg.src == SINK_ID:
                st.schicc_count += 1
                if not st.hp_timer_set:
                    st.hp_timer_set = True
                    actions.append(SetTimer(TimerKind.HP_OFFER_END, p.iccom_offer_window))
            return
        if msg.kind is MsgKind.FCHICC:
            if not head:
                return
            if msg.chosen == st.nid:
                st.usn_heard[msg.src] = st.usn_heard.get(msg.src, 0) + 1
                if msg.heard > 0:  # implicit ack: the peer heard us msg.heard times
                    entry = _entry(st, msg.src)
                    st.neighbors[msg.src] = replace(
                        entry,
                        est_out_high=estimate_prr(msg.heard, p.n_broadcasts),
                        out_known_high=True,
                    )
                return
            old = st.hp_offers.get(msg.src)
            st.hp_offers[msg.src] = (
                RouteOffer(msg, old.count + 1) if old else RouteOffer(msg)
            )
            if not st.hp_timer_set:
                st.hp_timer_set = True
                actions.append(SetTimer(TimerKind.HP_OFFER_END, p.iccom_offer_window))
            return
        if msg.kind is MsgKind.SLPNICC:
            if msg.src != SINK_ID:
                return
            st.slpnicc_count += 1
            _send(st, actions, Message(kind=MsgKind.ACK, src=st.nid), Power.LOW, dest=SINK_ID)
            if not st.lp_timer_set:
                st.lp_timer_set = True
                actions.append(SetTimer(TimerKind.LP_OFFER_END, p.iccom_offer_window))
            return
        if msg.kind is MsgKind.FLPNICC:
            if msg.chosen == st.nid:
                st.lp_usn_heard[msg.src] = st.lp_usn_heard.get(msg.src, 0) + 1
                return
            if not (head or member):
                return
            old = st.lp_offers.get(msg.src)
            st.lp_offers[msg.src] = (
                RouteOffer(msg, old.count + 1) if old else RouteOffer(msg)
            )
            if not st.lp_timer_set:
                st.lp_timer_set = True
                actions.append(SetTimer(TimerKind.LP_OFFER_END, p.iccom_offer_window))
            return
        if msg.kind is MsgKind.BACKFSHP:
            for nid, count in msg.counts:
                if nid == st.nid:
                    out = estimate_prr(count, p.n_broadcasts)
                    if st.dsn_high == msg.src or (
                        st.dsn_high is None and msg.src == SINK_ID
                    ):
                        st.elr_sink_out = out * (
                            1.0 if msg.src == SINK_ID else st.elr_sink_in
                        )
                    if msg.src == SINK_ID:
                        st.sink_out_high = out
                        st.sink_out_known_high = True
                    else:
                        entry = _entry(st, msg.src)
                        st.neighbors[msg.src] = replace(
                            entry, est_out_high=out, out_known_high=True
                        )
            return
        if msg.kind is MsgKind.BACKFSLP:
            for nid, count in msg.counts:
                if nid == st.nid:
                    out = estimate_prr(count, p.n_broadcasts)
                    if msg.src == SINK_ID:
                        st.sink_out_low = out
                        st.sink_out_known_low = True
                    else:
                        entry = _entry(st, msg.src)
                        st.neighbors[msg.src] = replace(
                            entry, est_out_low=out, out_known=True
                        )
            return
        return
    if not isinstance(event, TimerFired):
        return
    if event.kind is TimerKind.HP_OFFER_END:
        if not head:
            return
        candidates = []
        if st.schicc_count > 0:
            prof, score = _sink_candidate(st, st.schicc_count, 1, high=True)
            candidates.append((prof, score, st.schicc_count))
        for offer in st.hp_offers.values():
            prof, score = _route_candidate(st, offer, member_based=True)
            candidates.append((prof, score, offer.count))
        chosen = _pick_route(st, candidates)
        if chosen is None:
            return
        prof, _, count = chosen
        st.dsn_high = prof.node_id
        st.hts = prof.hops
        st.elr_sink_in = prof.link_term
        _emit_fchicc(st, actions, heard=count)
        return
    if event.kind is TimerKind.LP_OFFER_END:
        candidates = []
        if st.slpnicc_count > 0:
            prof, score = _sink_candidate(st, st.slpnicc_count, 1, high=False)
            candidates.append((prof, score, st.slpnicc_count))
        for offer in st.lp_offers.values():
            prof, score = _route_candidate(st, offer, member_based=False)
            candidates.append((prof, score, offer.count))
        chosen = _pick_route(st, candidates)
        if chosen is None:
            return
        prof, _, count = chosen
        st.dsn_low = prof.node_id
        st.hts_lp = prof.hops
        st.elr_lp_in = prof.link_term
        if member:
            _emit_flpnicc(st, actions, heard=count)
        return
    if event.kind is TimerKind.BACK_SEND:
        if st.params.id_based:
            return
        if st.usn_heard:
            counts = tuple(sorted(st.usn_heard.items()))
            _send(
                st,
                actions,
                Message(kind=MsgKind.BACKFSHP, src=st.nid, counts=counts),
                Power.HIGH,
            )
        if st.lp_usn_heard:
            counts = tuple(sorted(st.lp_usn_heard.items()))
            _send(
                st,
                actions,
                Message(kind=MsgKind.BACKFSLP, src=st.nid, counts=counts),
                Power.LOW,
            )


# ---- reporting -------------------------------------------------------------------


def forward_data(st: NodeState, actions: list, event: Event) -> None:
    """Periodic reporting: members push aggregates up the cluster, heads push
    one aggregate per round along the inter-cluster route, everyone relays
    foreign traffic immediately. Aggregation preserves report identities."""
    if isinstance(event, TimerFired) and event.kind is TimerKind.ROUND_TICK:
        round_seq = event.payload
        if st.energy.idle_per_round > 0.0:
            st.e_re = max(0.0, st.e_re - st.energy.idle_per_round)
            if st.e_re <= 0.0:
                return
        if st.status in (NodeStatus.CM, NodeStatus.TCM):
            sendable = st.parent() is not None
        elif st.status in (NodeStatus.CH, NodeStatus.SNCH):
            sendable = st.next_hop() is not None
        else:
            sendable = False
        if sendable:
            offset = (MAX_DEPTH_SLOTS - min(st.depth, MAX_DEPTH_SLOTS - 1)) * st.params.data_slot
            actions.append(SetTimer(TimerKind.DATA_SEND, offset, payload=round_seq))
        return
    if isinstance(event, TimerFired) and event.kind is TimerKind.DATA_SEND:
        round_seq = event.payload
        if st.status in (NodeStatus.CM, NodeStatus.TCM):
            target, power = st.parent(), Power.LOW
            if target is None:
                return
        else:
            hop = st.next_hop()
            if hop is None:
                return  # route lost since the tick: hold buffered reports
            target, power = hop
        own = (st.nid, round_seq)
        reports = tuple(st.report_buffer) + (own,)
        st.report_buffer = []
        actions.append(EmitMetric("gen", own))
        _send(
            st,
            actions,
            Message(kind=MsgKind.DATA, src=st.nid, reports=reports),
            power,
            dest=target,
        )
        return
    if isinstance(event, MsgIn) and event.msg.kind is MsgKind.DATA:
        if event.dest != st.nid:
            return  # overheard: counters were already updated
        msg = event.msg
        if st.status in (NodeStatus.CH, NodeStatus.SNCH):
            if msg.src in st.members:
                st.report_buffer.extend(msg.reports)
                return
            hop = st.next_hop()
            if hop is None:
                actions.append(EmitMetric("dropped_unroutable", len(msg.reports)))
                return
            target, power = hop
            _send(
                st,
                actions,
                Message(kind=MsgKind.DATA, src=st.nid, reports=msg.reports),
                power,
                dest=target,
            )
            return
        if st.status in (NodeStatus.CM, NodeStatus.TCM):
            if msg.src in st.subs:
                st.report_buffer.extend(msg.reports)
                return
            if st.dsn_low is not None and st.dsn_low != msg.src:
                target = st.dsn_low
            elif st.parent() is not None and st.parent() != msg.src:
                # no usable gateway route (or an unannounced sub): push the
                # traffic up the own cluster; the head relays it sinkward
                target = st.parent()
            else:
                actions.append(EmitMetric("dropped_unroutable", len(msg.reports)))
                return
            _send(
                st,
                actions,
                Message(kind=MsgKind.DATA, src=st.nid, reports=msg.reports),
                Power.LOW,
                dest=target,
            )


# ---- re-clustering ---------------------------------------------------------------


def maybe_recluster(st: NodeState, actions: list, now: int) -> None:
    """A head whose residual energy fell under the threshold calls for
    network-wide re-clustering (once per epoch)."""
    if st.status is not NodeStatus.CH:
        return
    if st.e_re >= st.e_th or st.recluster_called:
        return
    st.recluster_called = True
    actions.append(EmitMetric("recluster_call"))
    _send(st, actions, Message(kind=MsgKind.RECLUSTER, src=st.nid), Power.LOW)


def _handle_recluster(st: NodeState, actions: list, event: Recluster) -> None:
    st.epoch = event.epoch
    st.e_th = st.e_th * (1.0 - st.params.e_th_decay)
    was_isolated = st.status is NodeStatus.SNCH and st.degree() == 0
    _clear_epoch_state(st)
    actions.append(SetTimer(TimerKind.BACK_SEND, st.params.t_back_rel + _jitter(st, st.params.broadcast_span)))
    if was_isolated:
        return  # stays a single-node cluster; only routing gets rebuilt
    _set_status(st, actions, NodeStatus.UC)
    counts = tuple(
        (nid, e.heard_low, e.heard_high) for nid, e in sorted(st.neighbors.items())
    )
    _send(
        st,
        actions,
        Message(
            kind=MsgKind.STATS_SHARE,
            src=st.nid,
            sent_low=st.sent_low,
            sent_high=st.sent_high,
            counts=counts,
        ),
        Power.LOW,
        delay=_jitter(st, st.params.broadcast_span),
    )
    actions.append(SetTimer(TimerKind.STATS_END, st.params.discovery_window))


def _handle_stats_share(st: NodeState, msg: Message) -> None:
    entry = _entry(st, msg.src)
    heard_of_me_low = heard_of_me_high = 0
    for nid, low, high in msg.counts:
        if nid == st.nid:
            heard_of_me_low, heard_of_me_high = low, high
            break
    st.neighbors[msg.src] = replace(
        entry,
        claim_sent_low=msg.sent_low,
        claim_sent_high=msg.sent_high,
        claim_heard_low=heard_of_me_low,
        claim_heard_high=heard_of_me_high,
        claim_epoch=st.epoch,
    )


# ---- the transition function -------------------------------------------------------


def step(state: NodeState, event: Event) -> tuple[NodeState, list[Action]]:
    """Pure transition: returns (new state, actions). Reception costs are
    deducted here so decisions always see the node's own energy arithmetic."""
    st = state.clone()
    actions: list[Action] = []
    if isinstance(event, MsgIn):
        st.e_re = max(0.0, st.e_re - st.energy.rx)
        if st.e_re <= 0.0:
            return st, []
        record_hearing(st, event.msg, event.power)
        _dispatch_msg(st, actions, event)
    elif isinstance(event, TimerFired):
        _dispatch_timer(st, actions, event)
    elif isinstance(event, Start):
        begin_discovery(st, actions)
        actions.append(
            SetTimer(
                TimerKind.BACK_SEND,
                st.params.t_back_rel + _jitter(st, st.params.broadcast_span),
            )
        )
    elif isinstance(event, Recluster):
        _handle_recluster(st, actions, event)
    elif isinstance(event, EnergyAlarm):
        maybe_recluster(st, actions, event.now)
    return st, actions


def _dispatch_msg(st: NodeState, actions: list, event: MsgIn) -> None:
    msg = event.msg
    kind = msg.kind
    if kind is MsgKind.NDM:
        return  # discovery: the hearing record is the whole effect
    if kind is MsgKind.CHCV_SHARE:
        entry = _entry(st, msg.src)
        st.neighbors[msg.src] = replace(
            entry,
            adv_e_re=msg.e_re,
            adv_degree=msg.degree,
            adv_mlr=msg.mlr_in,
            adv_epoch=st.epoch,
        )
        return
    if kind is MsgKind.STATS_SHARE:
        _handle_stats_share(st, msg)
        return
    if kind is MsgKind.ICH:
        handle_ich(st, actions, msg, event.now)
        return
    if kind is MsgKind.CJN:
        handle_cjn(st, actions, msg)
        return
    if kind in (MsgKind.SCJ, MsgKind.TCMO, MsgKind.TCJN):
        handle_scj_and_tcmo(st, actions, event)
        return
    if kind in (
        MsgKind.SCHICC,
        MsgKind.FCHICC,
        MsgKind.SLPNICC,
        MsgKind.FLPNICC,
        MsgKind.BACKFSHP,
        MsgKind.BACKFSLP,
    ):
        run_iccom(st, actions, event)
        return
    if kind is MsgKind.DATA:
        forward_data(st, actions, event)
        return
    if kind in (MsgKind.RECLUSTER, MsgKind.ACK):
        return  # recluster calls are orchestrated globally; acks are sink-side
    actions.append(EmitMetric("dropped_unknown", str(kind)))


def _dispatch_timer(st: NodeState, actions: list, event: TimerFired) -> None:
    kind = event.kind
    if kind in (TimerKind.DISCOVERY_END, TimerKind.STATS_END):
        _begin_election(st, actions)
        return
    if kind is TimerKind.ELECTION:
        run_election(st, actions, event.now)
        return
    if kind is TimerKind.OFFER_END:
        handle_offer_end(st, actions, event.now)
        return
    if kind is TimerKind.SCJ_END:
        handle_scj_and_tcmo(st, actions, event)
        return
    if kind in (TimerKind.HP_OFFER_END, TimerKind.LP_OFFER_END, TimerKind.BACK_SEND):
        run_iccom(st, actions, event)
        return
    if kind in (TimerKind.ROUND_TICK, TimerKind.DATA_SEND):
        forward_data(st, actions, event)
        return


# ---- the sink ------------------------------------------------------------------


@dataclass
class SinkState:
    params: ProtocolParams
    rng: int
    epoch: int = 0
    hp_usn_heard: dict = field(default_factory=dict)
    lp_usn_heard: dict = field(default_factory=dict)
    ack_heard: dict = field(default_factory=dict)
    seen_reports: set = field(default_factory=set)
    delivered: int = 0

    def clone(self) -> "SinkState":
        new = copy.copy(self)
        new.hp_usn_heard = dict(self.hp_usn_heard)
        new.lp_usn_heard = dict(self.lp_usn_heard)
        new.ack_heard = dict(self.ack_heard)
        new.seen_reports = set(self.seen_reports)
        return new


def sink_step(state: SinkState, event: Event) -> tuple[SinkState, list[Action]]:
    """Sink behavior: kick off route discovery each epoch, count what it hears
    from 1-hop nodes, block-ack at window end, and count unique report ids."""
    st = state.clone()
    actions: list[Action] = []
    p = st.params

    def jitter(span: int) -> int:
        st.rng, value = split_below(st.rng, span)
        return value

    if isinstance(event, Start) or isinstance(event, Recluster):
        if isinstance(event, Recluster):
            st.epoch = event.epoch
            st.hp_usn_heard = {}
            st.lp_usn_heard = {}
            st.ack_heard = {}
        actions.append(SetTimer(TimerKind.SINK_ICCOM, p.t_iccom_rel))
        actions.append(SetTimer(TimerKind.SINK_BACK, p.t_back_rel))
        return st, actions
    if isinstance(event, TimerFired):
        if event.kind is TimerKind.SINK_ICCOM:
            for _ in range(p.n_broadcasts):
                actions.append(
                    Send(
                        Message(kind=MsgKind.SCHICC, src=SINK_ID),
                        Power.HIGH,
                        delay=jitter(p.broadcast_span),
                    )
                )
            for _ in range(p.n_broadcasts):
                actions.append(
                    Send(
                        Message(kind=MsgKind.SLPNICC, src=SINK_ID),
                        Power.LOW,
                        delay=jitter(p.broadcast_span),
                    )
                )
        elif event.kind is TimerKind.SINK_BACK and not p.id_based:
            if st.hp_usn_heard:
                actions.append(
                    Send(
                        Message(
                            kind=MsgKind.BACKFSHP,
                            src=SINK_ID,
                            counts=tuple(sorted(st.hp_usn_heard.items())),
                        ),
                        Power.HIGH,
                    )
                )
            if st.lp_usn_heard:
                actions.append(
                    Send(
                        Message(
                            kind=MsgKind.BACKFSLP,
                            src=SINK_ID,
                            counts=tuple(sorted(st.lp_usn_heard.items())),
                        ),
                        Power.LOW,
                    )
                )
        return st, actions
    if isinstance(event, MsgIn):
        msg = event.msg
        if msg.kind is MsgKind.FCHICC and msg.chosen == SINK_ID:
            st.hp_usn_heard[msg.src] = st.hp_usn_heard.get(msg.src, 0) + 1
        elif msg.kind is MsgKind.FLPNICC and msg.chosen == SINK_ID:
            st.lp_usn_heard[msg.src] = st.lp_usn_heard.get(msg.src, 0) + 1
        elif msg.kind is MsgKind.ACK:
            st.ack_heard[msg.src] = st.ack_heard.get(msg.src, 0) + 1
        elif msg.kind is MsgKind.DATA and event.dest == SINK_ID:
            for rid in msg.reports:
                if rid not in st.seen_reports:
                    st.seen_reports.add(rid)
                    st.delivered += 1
                    actions.append(EmitMetric("sink_rx", rid))
        return st, actions
    return st, actions
