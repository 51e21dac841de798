"""Wire vocabulary shared by both protocols.

One frozen Message type carries every kind; unused fields stay at their
defaults. Payload collections are tuples so messages are hashable and safe
to share across state snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

BROADCAST = -1
SINK_ID = 0


class Power(Enum):
    LOW = "L"
    HIGH = "H"


class MsgKind(Enum):
    NDM = "ndm"                  # neighbor discovery broadcast
    CHCV_SHARE = "chcv_share"    # contestant's (e_re, degree, mlr_in) triple
    STATS_SHARE = "stats_share"  # pre-recluster traffic counters
    ICH = "ich"                  # cluster-head announcement / direct offer
    CJN = "cjn"                  # cluster-join notice naming the chosen head
    SCJ = "scj"                  # searching-to-join call from an uncovered node
    TCMO = "tcmo"                # transitive membership offer from a CM/TCM
    TCJN = "tcjn"                # transitive-join notice naming the chosen relay
    SCHICC = "schicc"            # sink's high-power route discovery
    FCHICC = "fchicc"            # forwarded high-power route discovery (CH relay)
    BACKFSHP = "backfshp"        # block-ack for the high-power leg (heard counts)
    SLPNICC = "slpnicc"          # sink's low-power route discovery
    FLPNICC = "flpnicc"          # forwarded low-power route discovery (CM/TCM relay)
    BACKFSLP = "backfslp"        # block-ack for the low-power leg
    ACK = "ack"                  # per-message ack (low-power sink discovery)
    RECLUSTER = "recluster"      # cluster head's network re-clustering call
    DATA = "data"                # periodic report traffic (aggregated payloads)


CONTROL_KINDS = frozenset(k for k in MsgKind if k is not MsgKind.DATA)


@dataclass(frozen=True)
class Message:
    kind: MsgKind
    src: int
    # advertised attributes (shares, offers)
    e_re: float = 0.0
    degree: int = 0
    mlr_in: float = 0.0
    link_term: float = 0.0       # LR/ELR carried by offers and route discovery
    hops: int = 0                # chain length / hops-to-sink
    members: int = 0             # direct-membership count (route offers from CHs)
    # pointers and ack bookkeeping
    chosen: int = -2             # join notices: chosen head; route msgs: current DSN
    heard: int = 0               # times the sender heard its DSN (implicit ack)
    # stats share claims
    sent_low: int = 0
    sent_high: int = 0
    counts: tuple = ()           # stats: ((nid, heard_low, heard_high), ...)
    #                              block-acks: ((nid, heard), ...)
    reports: tuple = ()          # data payload: ((origin, round_seq), ...)
