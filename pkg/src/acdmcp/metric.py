"""Cluster-head competence scoring and tie-breaking.

Pure functions only. The protocol ranks candidates by a weighted competence
value (CHCV) built from three node-local indices:

* REI, the residual-energy index: headroom above the election threshold,
  normalized by the threshold and clamped to (0, 1].
* NDI, the node-degree index: closeness of the node degree to an ideal
  degree IDEG; 1.0 at the ideal, shrinking toward 0 on either side.
* a link term: mean in-link reliability (MLR) for elections, the out-link
  reliability toward the offering head for direct joins, or an end-to-end
  product (ELR) plus a hop-count term for multi-hop offers.

Scores that differ by less than one part in 1e9 are treated as tied and the
phase-specific comparator chains below break the tie deterministically,
ending at the node id so the order is total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

REI_FLOOR = 0.001        # competence of a node at or below the energy threshold
TIE_QUANTUM = 1e-9       # scores tie iff they quantize to the same 1e-9 bucket
NDI_ZERO_DEGREE = 0.0    # defensive NDI for degree 0; isolated nodes never compete


class MetricError(ValueError):
    """Invalid metric input (bad weights, empty link set, ...)."""


class IsolatedNodeError(MetricError):
    """MLR requested for a node with no neighborhood links."""


@dataclass(frozen=True)
class EnergyState:
    """Residual energy and the current election threshold, same units."""

    e_re: float
    e_th: float


@dataclass(frozen=True)
class ImpactFactors:
    """CHCV weights. Three-term forms ignore if_zeta; four-term forms use it."""

    if_rei: float
    if_ndi: float
    if_link: float
    if_zeta: float = 0.0

    def _check_common(self, fields: dict[str, float]) -> None:
        for name, value in fields.items():
            if not 0.0 <= value <= 1.0:
                raise MetricError(f"{name} must be in [0, 1], got {value}")
        if any(v == 0.0 for v in fields.values()) and not any(
            v == 1.0 for v in fields.values()
        ):
            zero = next(name for name, v in fields.items() if v == 0.0)
            raise MetricError(
                f"{zero} is 0 but no single weight is 1 (zero weights are only "
                "allowed in a single-parameter configuration)"
            )

    def validate_election(self) -> None:
        """Three-term form: weights over (REI, NDI, link) must sum to 1."""
        fields = {"if_rei": self.if_rei, "if_ndi": self.if_ndi, "if_link": self.if_link}
        self._check_common(fields)
        if self.if_zeta != 0.0:
            raise MetricError("if_zeta must be 0 in the three-term form")
        total = self.if_rei + self.if_ndi + self.if_link
        if abs(total - 1.0) > 1e-9:
            raise MetricError(f"three-term weights sum to {total}, expected 1")

    def validate_multihop(self) -> None:
        """Four-term form: weights over (REI, NDI, link, hop) must sum to 1."""
        fields = {
            "if_rei": self.if_rei,
            "if_ndi": self.if_ndi,
            "if_link": self.if_link,
            "if_zeta": self.if_zeta,
        }
        self._check_common(fields)
        total = self.if_rei + self.if_ndi + self.if_link + self.if_zeta
        if abs(total - 1.0) > 1e-9:
            raise MetricError(f"four-term weights sum to {total}, expected 1")

    @classmethod
    def from_percents(cls, combo: Sequence[float]) -> "ImpactFactors":
        """Build from percents in (REI, link, NDI[, hop]) order.

        Note the middle slot is the link weight; that matches how weight
        combinations are written in experiment configs, e.g. (20, 60, 20)
        is link-heavy.
        """
        if len(combo) == 3:
            rei, link, ndi = (c / 100.0 for c in combo)
            made = cls(if_rei=rei, if_ndi=ndi, if_link=link)
            made.validate_election()
            return made
        if len(combo) == 4:
            rei, link, ndi, zeta = (c / 100.0 for c in combo)
            made = cls(if_rei=rei, if_ndi=ndi, if_link=link, if_zeta=zeta)
            made.validate_multihop()
            return made
        raise MetricError(f"expected 3 or 4 percents, got {len(combo)}")

    def multihop_variant(self, zeta_share: float = 0.15) -> "ImpactFactors":
        """Derive a four-term form by scaling the triple and giving the hop
        term a fixed share."""
        scale = 1.0 - zeta_share
        made = ImpactFactors(
            if_rei=self.if_rei * scale,
            if_ndi=self.if_ndi * scale,
            if_link=self.if_link * scale,
            if_zeta=zeta_share,
        )
        made.validate_multihop()
        return made

    def label(self) -> str:
        """Short config-order tag (REI-link-NDI percents), e.g. '20-60-20'."""
        return (
            f"{round(self.if_rei * 100)}-"
            f"{round(self.if_link * 100)}-"
            f"{round(self.if_ndi * 100)}"
        )


@dataclass(frozen=True)
class LinkStats:
    """Directed link bookkeeping: own transmissions the peer could have heard,
    messages heard from the peer, and own messages the peer reports hearing."""

    sent: int = 0
    heard: int = 0
    acked: int = 0


@dataclass(frozen=True)
class CandidateProfile:
    """What a candidate advertises: identity, raw tie-break keys, and the
    phase link term (MLR, LR or ELR depending on the phase)."""

    node_id: int
    e_re: float
    degree: int
    link_term: float
    hops: int = 1


def quantize(value: float) -> int:
    """Bucket a derived score onto the tie grid. Bucketing (rather than an
    epsilon window) keeps the comparator chains transitive."""
    return round(value / TIE_QUANTUM)


def estimate_prr(heard: int, sent: int) -> float:
    """Packet-reception-ratio estimate of a link, clamped to [0, 1]."""
    if sent <= 0:
        return 0.0
    return min(1.0, heard / sent)


# ---- indices ----------------------------------------------------------------


def compute_rei(energy: EnergyState) -> float:
    """Residual-energy index in (0, 1].

    Nodes strictly above the threshold score their relative headroom
    (e_re - e_th) / e_th, clamped to 1.0; everyone else gets a floor value
    that keeps them comparable but uncompetitive.
    """
    if energy.e_th <= 0.0:
        raise MetricError(f"e_th must be positive, got {energy.e_th}")
    if energy.e_re > energy.e_th:
        return min(1.0, (energy.e_re - energy.e_th) / energy.e_th)
    return REI_FLOOR


def compute_ndi(degree: int, ideg: int) -> float:
    """Node-degree index in [0, 1]: 1.0 at the ideal degree, the smaller/larger
    ratio otherwise."""
    if ideg < 1:
        raise MetricError(f"ideg must be >= 1, got {ideg}")
    if degree < 0:
        raise MetricError(f"degree must be >= 0, got {degree}")
    if degree == 0:
        return NDI_ZERO_DEGREE
    if degree == ideg:
        return 1.0
    if degree > ideg:
        return ideg / degree
    return degree / ideg


def compute_mlr(links: Iterable[float]) -> float:
    """Mean link reliability over a neighborhood; empty input signals an
    isolated node (the caller turns that into single-node-cluster status)."""
    values = list(links)
    if not values:
        raise IsolatedNodeError("no neighborhood links")
    return sum(values) / len(values)


def compute_elr(path: Iterable[float]) -> float:
    """End-to-end link reliability: product over path hops. The empty path is
    a node's path to itself, reliability 1.0."""
    result = 1.0
    for hop in path:
        result *= hop
    return result


# ---- competence scores -------------------------------------------------------


def chcv_election(rei: float, ndi: float, mlr_in: float, ifs: ImpactFactors) -> float:
    """Election-phase competence: weighted sum of REI, NDI and mean in-link
    reliability. Inputs live in [0, 1]; weights were validated at config load."""
    return rei * ifs.if_rei + ndi * ifs.if_ndi + mlr_in * ifs.if_link


def chcv_join(rei: float, ndi: float, lr_out: float, ifs: ImpactFactors) -> float:
    """Direct-join competence of an offering cluster head, scored by the joining
    node: the head's REI and NDI plus the out-link reliability toward it."""
    return rei * ifs.if_rei + ndi * ifs.if_ndi + lr_out * ifs.if_link


def chcv_multihop(
    rei: float, ndi: float, elr: float, hops: int, ifs: ImpactFactors
) -> float:
    """Multi-hop offer competence: adds an inverse hop-count term so shorter
    chains win when reliability is comparable. hops >= 1."""
    if hops < 1:
        raise MetricError(f"hops must be >= 1, got {hops}")
    return (
        rei * ifs.if_rei
        + ndi * ifs.if_ndi
        + elr * ifs.if_link
        + (1.0 / hops) * ifs.if_zeta
    )


# ---- comparator chains -------------------------------------------------------
#
# Each phase ranks (CandidateProfile, score) pairs with its own chain. Keys are
# tuples: derived values quantized, raw keys exact, node id last (direction set
# by nid_higher). Bigger tuple wins.


def degree_preference(degree: int, ideg: int) -> tuple[int, int]:
    """Orderable encoding of the ideal-degree rule: at-or-below the ideal beats
    above it; below the ideal higher degree wins; above it lower degree wins.
    A node exactly at the ideal therefore beats every other degree."""
    if degree <= ideg:
        return (1, degree)
    return (0, -degree)


def _nid_key(node_id: int, nid_higher: bool) -> int:
    return node_id if nid_higher else -node_id


def election_key(
    candidate: CandidateProfile, score: float, ideg: int, nid_higher: bool = True
) -> tuple:
    """Election order: score, mean in-link reliability, residual energy,
    degree preference, node id."""
    return (
        quantize(score),
        quantize(candidate.link_term),
        candidate.e_re,
        degree_preference(candidate.degree, ideg),
        _nid_key(candidate.node_id, nid_higher),
    )


def join_key(
    candidate: CandidateProfile, score: float, ideg: int, nid_higher: bool = True
) -> tuple:
    """Direct-join order: score, out-link reliability, degree preference,
    residual energy, node id. Degree outranks energy here, unlike elections."""
    return (
        quantize(score),
        quantize(candidate.link_term),
        degree_preference(candidate.degree, ideg),
        candidate.e_re,
        _nid_key(candidate.node_id, nid_higher),
    )


def transitive_key(
    candidate: CandidateProfile, score: float, ideg: int, nid_higher: bool = True
) -> tuple:
    """Transitive-join order: score, end-to-end reliability, fewer hops,
    degree preference, residual energy, node id."""
    return (
        quantize(score),
        quantize(candidate.link_term),
        -candidate.hops,
        degree_preference(candidate.degree, ideg),
        candidate.e_re,
        _nid_key(candidate.node_id, nid_higher),
    )


def iccom_key(
    candidate: CandidateProfile, score: float, nid_higher: bool = True
) -> tuple:
    """Inter-cluster route order: score, end-to-end reliability, fewer hops to
    the sink, residual energy, node id. No degree key in this phase."""
    return (
        quantize(score),
        quantize(candidate.link_term),
        -candidate.hops,
        candidate.e_re,
        _nid_key(candidate.node_id, nid_higher),
    )


Scored = tuple[CandidateProfile, float]


def _cmp(ka: tuple, kb: tuple) -> int:
    if ka > kb:
        return 1
    if ka < kb:
        return -1
    return 0


def compare_election_candidates(
    a: Scored, b: Scored, ideg: int, nid_higher: bool = True
) -> int:
    """1 if a outranks b, -1 if b outranks a; 0 only for identical node ids."""
    return _cmp(
        election_key(a[0], a[1], ideg, nid_higher),
        election_key(b[0], b[1], ideg, nid_higher),
    )


def compare_join_offers(a: Scored, b: Scored, ideg: int, nid_higher: bool = True) -> int:
    return _cmp(
        join_key(a[0], a[1], ideg, nid_higher), join_key(b[0], b[1], ideg, nid_higher)
    )


def compare_transitive_offers(
    a: Scored, b: Scored, ideg: int, nid_higher: bool = True
) -> int:
    return _cmp(
        transitive_key(a[0], a[1], ideg, nid_higher),
        transitive_key(b[0], b[1], ideg, nid_higher),
    )


def compare_iccom_offers(a: Scored, b: Scored, nid_higher: bool = True) -> int:
    return _cmp(iccom_key(a[0], a[1], nid_higher), iccom_key(b[0], b[1], nid_higher))
