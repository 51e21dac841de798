"""Scoring and comparator tests.

Frozen expected values were computed by hand (weighted sums / products written
out in the asserts) before the module was implemented; property tests then pin
the algebraic behavior over random inputs.
"""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acdmcp.metric import (
    CandidateProfile,
    EnergyState,
    ImpactFactors,
    IsolatedNodeError,
    MetricError,
    NDI_ZERO_DEGREE,
    REI_FLOOR,
    chcv_election,
    chcv_join,
    chcv_multihop,
    compare_election_candidates,
    compare_iccom_offers,
    compare_join_offers,
    compare_transitive_offers,
    compute_elr,
    compute_mlr,
    compute_ndi,
    compute_rei,
    degree_preference,
    election_key,
    estimate_prr,
    iccom_key,
    join_key,
    quantize,
    transitive_key,
)

IDEG = 4


# ---- residual-energy index ----


def test_rei_clamps_to_one_with_large_headroom():
    assert compute_rei(EnergyState(e_re=10.0, e_th=2.0)) == 1.0


def test_rei_relative_headroom():
    assert compute_rei(EnergyState(e_re=3.0, e_th=2.0)) == pytest.approx(0.5, abs=1e-12)


def test_rei_floor_below_threshold():
    assert compute_rei(EnergyState(e_re=1.0, e_th=2.0)) == REI_FLOOR


def test_rei_floor_at_threshold_exactly():
    assert compute_rei(EnergyState(e_re=2.0, e_th=2.0)) == REI_FLOOR


def test_rei_rejects_nonpositive_threshold():
    with pytest.raises(MetricError):
        compute_rei(EnergyState(e_re=1.0, e_th=0.0))


# ---- node-degree index ----


def test_ndi_ideal_degree():
    assert compute_ndi(4, IDEG) == 1.0


def test_ndi_above_ideal():
    assert compute_ndi(8, IDEG) == pytest.approx(0.5, abs=1e-12)


def test_ndi_below_ideal():
    assert compute_ndi(2, IDEG) == pytest.approx(0.5, abs=1e-12)


def test_ndi_zero_degree_defensive_value():
    assert compute_ndi(0, IDEG) == NDI_ZERO_DEGREE


def test_ndi_rejects_bad_args():
    with pytest.raises(MetricError):
        compute_ndi(3, 0)
    with pytest.raises(MetricError):
        compute_ndi(-1, 4)


# ---- link reliability aggregates ----


def test_mlr_mean():
    assert compute_mlr([0.8, 1.0, 0.6]) == pytest.approx(0.8, abs=1e-9)


def test_mlr_empty_signals_isolated():
    with pytest.raises(IsolatedNodeError):
        compute_mlr([])


def test_elr_two_hops():
    assert compute_elr([0.9, 0.8]) == pytest.approx(0.72, abs=1e-9)


def test_elr_four_equal_hops():
    assert compute_elr([0.9] * 4) == pytest.approx(0.6561, abs=1e-9)


def test_elr_empty_path_is_identity():
    assert compute_elr([]) == 1.0


def test_estimate_prr():
    assert estimate_prr(7, 10) == pytest.approx(0.7)
    assert estimate_prr(12, 10) == 1.0
    assert estimate_prr(3, 0) == 0.0


# ---- competence scores ----


def test_chcv_election_worked_example():
    ifs = ImpactFactors(if_rei=0.4, if_ndi=0.2, if_link=0.4)
    # 0.5*0.4 + 1.0*0.2 + 0.8*0.4 = 0.72
    assert chcv_election(0.5, 1.0, 0.8, ifs) == pytest.approx(0.72, abs=1e-9)


def test_chcv_election_floor_candidate():
    ifs = ImpactFactors(if_rei=0.5, if_ndi=0.25, if_link=0.25)
    # 0.001*0.5 + 0.5*0.25 + 0.9*0.25 = 0.3505
    assert chcv_election(0.001, 0.5, 0.9, ifs) == pytest.approx(0.3505, abs=1e-9)


def test_chcv_join_worked_example():
    ifs = ImpactFactors(if_rei=0.3, if_ndi=0.3, if_link=0.4)
    # 0.8*0.3 + 0.5*0.3 + 0.9*0.4 = 0.75
    assert chcv_join(0.8, 0.5, 0.9, ifs) == pytest.approx(0.75, abs=1e-9)


def test_chcv_multihop_equal_weights():
    ifs = ImpactFactors(0.25, 0.25, 0.25, 0.25)
    # 0.25 + 0.25 + 0.25 + 0.25/2 = 0.875
    assert chcv_multihop(1.0, 1.0, 1.0, 2, ifs) == pytest.approx(0.875, abs=1e-9)


def test_chcv_multihop_mixed():
    ifs = ImpactFactors(if_rei=0.2, if_ndi=0.2, if_link=0.4, if_zeta=0.2)
    # 0.5*0.2 + 0.5*0.2 + 0.81*0.4 + 0.5*0.2 = 0.624
    assert chcv_multihop(0.5, 0.5, 0.81, 2, ifs) == pytest.approx(0.624, abs=1e-9)


def test_chcv_multihop_rejects_zero_hops():
    with pytest.raises(MetricError):
        chcv_multihop(1.0, 1.0, 1.0, 0, ImpactFactors(0.25, 0.25, 0.25, 0.25))


# ---- weight validation ----


def test_weights_must_sum_to_one():
    with pytest.raises(MetricError):
        ImpactFactors(0.5, 0.5, 0.5).validate_election()
    ImpactFactors(0.2, 0.2, 0.6).validate_election()


def test_zero_weight_needs_single_parameter_form():
    with pytest.raises(MetricError):
        ImpactFactors(0.0, 0.4, 0.6).validate_election()
    ImpactFactors(0.0, 0.0, 1.0).validate_election()  # single-parameter: fine


def test_three_term_form_requires_zero_zeta():
    with pytest.raises(MetricError):
        ImpactFactors(0.2, 0.2, 0.4, 0.2).validate_election()


def test_from_percents_order_is_rei_link_ndi():
    ifs = ImpactFactors.from_percents((20, 60, 20))
    assert ifs.if_rei == pytest.approx(0.2)
    assert ifs.if_link == pytest.approx(0.6)
    assert ifs.if_ndi == pytest.approx(0.2)


def test_multihop_variant_keeps_proportions():
    ifs = ImpactFactors.from_percents((20, 60, 20)).multihop_variant()
    ifs.validate_multihop()
    assert ifs.if_zeta == pytest.approx(0.15)
    assert ifs.if_link / ifs.if_rei == pytest.approx(3.0)


# ---- degree preference ----


def test_degree_preference_ideal_beats_everything():
    best = degree_preference(IDEG, IDEG)
    for d in (0, 1, 2, 3, 5, 6, 10):
        assert best > degree_preference(d, IDEG)


def test_degree_preference_below_higher_wins():
    assert degree_preference(3, IDEG) > degree_preference(2, IDEG)


def test_degree_preference_above_lower_wins():
    assert degree_preference(5, IDEG) > degree_preference(6, IDEG)


def test_degree_preference_straddle_prefers_below():
    assert degree_preference(3, IDEG) > degree_preference(5, IDEG)
    assert degree_preference(1, IDEG) > degree_preference(5, IDEG)


# ---- comparator chains ----


def prof(nid, e_re=5.0, degree=4, link=0.8, hops=1):
    return CandidateProfile(node_id=nid, e_re=e_re, degree=degree, link_term=link, hops=hops)


def test_election_score_dominates():
    a = (prof(1, e_re=1.0, link=0.2), 0.9)
    b = (prof(2, e_re=9.0, link=0.9), 0.8)
    assert compare_election_candidates(a, b, IDEG) == 1


def test_election_tie_falls_to_mlr_then_energy():
    a = (prof(1, e_re=1.0, link=0.9), 0.7)
    b = (prof(2, e_re=9.0, link=0.8), 0.7)
    assert compare_election_candidates(a, b, IDEG) == 1  # higher MLR wins
    c = (prof(3, e_re=2.0, link=0.9), 0.7)
    assert compare_election_candidates(c, a, IDEG) == 1  # then higher energy


def test_election_full_tie_resolved_by_nid():
    a = (prof(7), 0.5)
    b = (prof(3), 0.5)
    assert compare_election_candidates(a, b, IDEG) == 1
    assert compare_election_candidates(a, b, IDEG, nid_higher=False) == -1


def test_join_ranks_degree_before_energy():
    # Same score and link term. Joining prefers the ideal-degree head even
    # against a much richer one; the election chain would pick the energy.
    a = (prof(1, e_re=0.5, degree=4), 0.6)
    b = (prof(2, e_re=99.0, degree=3), 0.6)
    assert compare_join_offers(a, b, IDEG) == 1
    assert compare_election_candidates(a, b, IDEG) == -1


def test_transitive_prefers_fewer_hops_on_tie():
    a = (prof(1, hops=2), 0.6)
    b = (prof(2, hops=3), 0.6)
    assert compare_transitive_offers(a, b, IDEG) == 1


def test_transitive_worked_example_shorter_chain_wins():
    ifs = ImpactFactors(0.25, 0.25, 0.25, 0.25)
    # Offer A relays through a 2-hop chain with end-to-end reliability 0.81;
    # offer B through a 3-hop chain of 0.95-links (0.857375 end-to-end).
    elr_a, elr_b = 0.9 * 0.9, 0.95**3
    score_a = chcv_multihop(1.0, 1.0, elr_a, 2, ifs)
    score_b = chcv_multihop(1.0, 1.0, elr_b, 3, ifs)
    assert score_a == pytest.approx(0.5 + 0.3275, abs=1e-9)
    assert score_b == pytest.approx(0.5 + 0.29767708333333335, abs=1e-9)
    a = (prof(1, link=elr_a, hops=2), score_a)
    b = (prof(2, link=elr_b, hops=3), score_b)
    assert compare_transitive_offers(a, b, IDEG) == 1


def test_iccom_ignores_degree():
    a = (prof(1, e_re=5.0, degree=1), 0.6)
    b = (prof(2, e_re=4.0, degree=4), 0.6)
    assert compare_iccom_offers(a, b) == 1  # energy decides; degree is no key here


def test_fully_equal_offers_resolved_by_higher_nid():
    a = (prof(9), 0.5)
    b = (prof(2), 0.5)
    for cmpf in (
        lambda x, y: compare_election_candidates(x, y, IDEG),
        lambda x, y: compare_join_offers(x, y, IDEG),
        lambda x, y: compare_transitive_offers(x, y, IDEG),
        compare_iccom_offers,
    ):
        assert cmpf(a, b) == 1


def test_quantized_scores_tie_despite_float_noise():
    ifs = ImpactFactors(0.2, 0.2, 0.6)
    s1 = chcv_election(0.3, 0.7, 0.5, ifs)
    s2 = 0.3 * 0.2 + (0.7 * 0.2 + 0.5 * 0.6)  # same inputs, different grouping
    a = (prof(1, e_re=1.0), s1)
    b = (prof(2, e_re=2.0), s2)
    # Must fall through the score key to the energy key even if s1 != s2 bitwise.
    assert compare_election_candidates(b, a, IDEG) == 1


# ---- property tests ----

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@given(
    e_re=st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
    e_th=st.floats(min_value=1e-6, max_value=1e6, allow_nan=False),
)
def test_rei_always_in_unit_interval(e_re, e_th):
    value = compute_rei(EnergyState(e_re, e_th))
    assert 0.0 < value <= 1.0


@given(degree=st.integers(min_value=0, max_value=1000), ideg=st.integers(min_value=1, max_value=50))
def test_ndi_always_in_unit_interval(degree, ideg):
    assert 0.0 <= compute_ndi(degree, ideg) <= 1.0


@given(values=st.lists(probs, min_size=1, max_size=30))
def test_mlr_bounded_by_extremes(values):
    mlr = compute_mlr(values)
    assert min(values) - 1e-12 <= mlr <= max(values) + 1e-12


@given(a=st.lists(probs, max_size=8), b=st.lists(probs, max_size=8))
def test_elr_multiplicative_composition(a, b):
    assert compute_elr(a + b) == pytest.approx(compute_elr(a) * compute_elr(b), rel=1e-12, abs=1e-250)


@given(path=st.lists(probs, min_size=1, max_size=8))
def test_elr_never_exceeds_weakest_hop(path):
    assert compute_elr(path) <= min(path) + 1e-12


@given(rei=probs, ndi=probs, link=probs, hops=st.integers(min_value=1, max_value=32))
def test_chcv_scores_in_unit_interval(rei, ndi, link, hops):
    ifs3 = ImpactFactors(0.2, 0.2, 0.6)
    ifs4 = ImpactFactors(0.2, 0.2, 0.4, 0.2)
    assert 0.0 <= chcv_election(rei, ndi, link, ifs3) <= 1.0
    assert 0.0 <= chcv_join(rei, ndi, link, ifs3) <= 1.0
    assert 0.0 <= chcv_multihop(rei, ndi, link, hops, ifs4) <= 1.0


def test_single_parameter_link_weight_orders_by_link_alone():
    ifs = ImpactFactors(0.0, 0.0, 1.0)
    rng = random.Random(20210)
    for _ in range(500):
        pa = prof(1, e_re=rng.uniform(0, 10), degree=rng.randrange(0, 9), link=rng.random())
        pb = prof(2, e_re=rng.uniform(0, 10), degree=rng.randrange(0, 9), link=rng.random())
        sa = chcv_election(rng.random(), rng.random(), pa.link_term, ifs)
        sb = chcv_election(rng.random(), rng.random(), pb.link_term, ifs)
        assert sa == pa.link_term and sb == pb.link_term
        if quantize(pa.link_term) != quantize(pb.link_term):
            want = 1 if pa.link_term > pb.link_term else -1
            assert compare_election_candidates((pa, sa), (pb, sb), IDEG) == want


def _random_scored(rng: random.Random, nid: int):
    p = CandidateProfile(
        node_id=nid,
        e_re=rng.choice([rng.uniform(0, 10), round(rng.uniform(0, 10), 1)]),
        degree=rng.randrange(0, 10),
        link_term=rng.choice([rng.random(), round(rng.random(), 2)]),
        hops=rng.randrange(1, 6),
    )
    score = rng.choice([rng.random(), round(rng.random(), 2)])
    return (p, score)


@pytest.mark.parametrize(
    "cmpf",
    [
        lambda a, b: compare_election_candidates(a, b, IDEG),
        lambda a, b: compare_join_offers(a, b, IDEG),
        lambda a, b: compare_transitive_offers(a, b, IDEG),
        lambda a, b: compare_iccom_offers(a, b),
    ],
    ids=["election", "join", "transitive", "iccom"],
)
def test_comparators_are_strict_total_orders(cmpf):
    rng = random.Random(77)
    for _ in range(2500):
        a = _random_scored(rng, 1)
        b = _random_scored(rng, 2)
        c = _random_scored(rng, 3)
        ab, ba = cmpf(a, b), cmpf(b, a)
        assert ab in (-1, 1) and ba == -ab  # totality + antisymmetry
        # transitivity
        bc, ac = cmpf(b, c), cmpf(a, c)
        if ab == 1 and bc == 1:
            assert ac == 1
        if ab == -1 and bc == -1:
            assert ac == -1


@pytest.mark.parametrize(
    "keyf,cmpf",
    [
        (
            lambda s: election_key(s[0], s[1], IDEG),
            lambda a, b: compare_election_candidates(a, b, IDEG),
        ),
        (lambda s: join_key(s[0], s[1], IDEG), lambda a, b: compare_join_offers(a, b, IDEG)),
        (
            lambda s: transitive_key(s[0], s[1], IDEG),
            lambda a, b: compare_transitive_offers(a, b, IDEG),
        ),
        (lambda s: iccom_key(s[0], s[1]), lambda a, b: compare_iccom_offers(a, b)),
    ],
    ids=["election", "join", "transitive", "iccom"],
)
def test_max_by_key_agrees_with_comparator(keyf, cmpf):
    rng = random.Random(1234)
    for _ in range(500):
        group = [_random_scored(rng, nid) for nid in range(1, 6)]
        best = max(group, key=keyf)
        for other in group:
            if other is not best:
                assert cmpf(best, other) == 1
