"""Id-based clustering baseline.

Same radio discipline, phase timetable, event model and reporting machinery
as the adaptive protocol, with every decision point swapped for ids: the
highest id in radio range heads a cluster, members join the highest-id head
they heard, orphans run iterated highest-id rounds until someone in range
promotes itself, and the sink route prefers fewer hops then higher id.

No link estimate, residual energy or degree reaches any decision. The shared
message types still carry those fields, but the selection logic in this
module never reads them; routing goes through `_pick_route`'s id branch
(enabled by `ProtocolParams.id_based`), which ranks by (fewer hops, higher
id) only.
"""

from __future__ import annotations

from dataclasses import replace

from .messages import Message, MsgKind, Power
from .protocol import (
    Action,
    EnergyParams,
    Event,
    EnergyAlarm,
    MsgIn,
    NodeState,
    NodeStatus,
    ProtocolParams,
    Recluster,
    SetTimer,
    Start,
    TimerFired,
    TimerKind,
    _begin_scj,
    _clear_epoch_state,
    _jitter,
    _send,
    _set_status,
    begin_discovery,
    forward_data,
    handle_cjn,
    make_node,
    maybe_recluster,
    record_hearing,
    run_iccom,
)


def baseline_params(params: ProtocolParams) -> ProtocolParams:
    return params if params.id_based else replace(params, id_based=True)


def make_baseline_node(
    nid: int,
    params: ProtocolParams,
    energy: EnergyParams,
    seed: int,
    e_th: float,
) -> NodeState:
    return make_node(nid, baseline_params(params), energy, seed, e_th)


def _elect_by_id(st: NodeState, actions: list) -> None:
    """Head iff the own id beats every neighbor's."""
    peers = st.low_peers()
    if not peers:
        _set_status(st, actions, NodeStatus.SNCH)
        return
    if st.nid > max(peers):
        _promote(st, actions)
        return
    _set_status(st, actions, NodeStatus.UC)
    actions.append(SetTimer(TimerKind.OFFER_END, st.params.offer_window))


def _promote(st: NodeState, actions: list) -> None:
    _set_status(st, actions, NodeStatus.CH)
    st.depth = 0
    st.elr_to_ch = 1.0
    st.shared = (st.e_re, st.degree(), 0.0)
    _send(
        st,
        actions,
        Message(kind=MsgKind.ICH, src=st.nid),
        Power.LOW,
        delay=_jitter(st, st.params.broadcast_span),
    )


def _accept_by_id(st: NodeState, actions: list, head: int) -> None:
    _set_status(st, actions, NodeStatus.CM)
    st.my_ch = head
    st.my_tch = None
    st.depth = 1
    st.elr_to_ch = 1.0
    st.ich_offers = {}
    st.orphan_ids = set()
    _send(
        st,
        actions,
        Message(kind=MsgKind.CJN, src=st.nid, chosen=head),
        Power.LOW,
        delay=_jitter(st, st.params.broadcast_span // 2),
    )


def _join_window_end(st: NodeState, actions: list) -> None:
    """Offer window or orphan round close: join the highest-id head heard,
    self-promote when no louder orphan is around, else try again."""
    if st.status is not NodeStatus.UC:
        return
    if st.ich_offers:
        _accept_by_id(st, actions, max(st.ich_offers))
        return
    if st.scj_tries > 0 and (not st.orphan_ids or st.nid > max(st.orphan_ids)):
        _promote(st, actions)
        return
    if st.scj_tries <= st.params.scj_retry_budget:
        st.orphan_ids = set()
        _begin_scj(st, actions)
        return
    _set_status(st, actions, NodeStatus.SNCH)


def _handle_msg(st: NodeState, actions: list, event: MsgIn) -> None:
    msg = event.msg
    kind = msg.kind
    if kind is MsgKind.NDM:
        return
    if kind is MsgKind.ICH:
        if st.status is NodeStatus.CH and msg.src > st.nid:
            # late promotion collision: the lower id backs down and rejoins
            st.members = set()
            _set_status(st, actions, NodeStatus.UC)
            st.ich_offers = {msg.src: msg}
            actions.append(SetTimer(TimerKind.OFFER_END, st.params.offer_window))
            return
        if st.status is NodeStatus.UC:
            st.ich_offers[msg.src] = msg
        return
    if kind is MsgKind.CJN:
        handle_cjn(st, actions, msg)
        return
    if kind is MsgKind.SCJ:
        if st.status is NodeStatus.CH:
            _send(
                st,
                actions,
                Message(kind=MsgKind.ICH, src=st.nid),
                Power.LOW,
                dest=msg.src,
                delay=_jitter(st, st.params.broadcast_span // 2),
            )
        elif st.status is NodeStatus.UC:
            st.orphan_ids.add(msg.src)
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
    # TCMO/TCJN/shares are never produced by this protocol; ignore quietly


def _handle_timer(st: NodeState, actions: list, event: TimerFired) -> None:
    kind = event.kind
    if kind is TimerKind.DISCOVERY_END:
        actions.append(SetTimer(TimerKind.ELECTION, st.params.share_window))
        return
    if kind is TimerKind.STATS_END:
        # presence-ping window closed: drop peers that stayed silent
        for nid, entry in list(st.neighbors.items()):
            if entry.seen_epoch != st.epoch:
                del st.neighbors[nid]
        actions.append(SetTimer(TimerKind.ELECTION, st.params.share_window))
        return
    if kind is TimerKind.ELECTION:
        _elect_by_id(st, actions)
        return
    if kind in (TimerKind.OFFER_END, TimerKind.SCJ_END):
        _join_window_end(st, actions)
        return
    if kind in (TimerKind.HP_OFFER_END, TimerKind.LP_OFFER_END, TimerKind.BACK_SEND):
        run_iccom(st, actions, event)
        return
    if kind in (TimerKind.ROUND_TICK, TimerKind.DATA_SEND):
        forward_data(st, actions, event)
        return


def _handle_recluster(st: NodeState, actions: list, event: Recluster) -> None:
    st.epoch = event.epoch
    st.e_th = st.e_th * (1.0 - st.params.e_th_decay)
    was_isolated = st.status is NodeStatus.SNCH and st.degree() == 0
    _clear_epoch_state(st)
    if was_isolated:
        return
    _set_status(st, actions, NodeStatus.UC)
    _send(
        st,
        actions,
        Message(kind=MsgKind.NDM, src=st.nid),
        Power.LOW,
        delay=_jitter(st, st.params.broadcast_span),
    )
    actions.append(SetTimer(TimerKind.STATS_END, st.params.discovery_window))


def baseline_step(state: NodeState, event: Event) -> tuple[NodeState, list[Action]]:
    """Transition function; same contract as `protocol.step`."""
    st = state.clone()
    actions: list[Action] = []
    if isinstance(event, MsgIn):
        st.e_re = max(0.0, st.e_re - st.energy.rx)
        if st.e_re <= 0.0:
            return st, []
        record_hearing(st, event.msg, event.power)
        _handle_msg(st, actions, event)
    elif isinstance(event, TimerFired):
        _handle_timer(st, actions, event)
    elif isinstance(event, Start):
        begin_discovery(st, actions)
    elif isinstance(event, Recluster):
        _handle_recluster(st, actions, event)
    elif isinstance(event, EnergyAlarm):
        maybe_recluster(st, actions, event.now)
    return st, actions
