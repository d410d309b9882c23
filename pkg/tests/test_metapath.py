from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from helpers import M2M, M2O, brute_force_traces, make_hin, random_schema
from hinfraud.datagen import GenConfig, generate
from hinfraud.hin import HinSchema, LinkType
from hinfraud.metapath import (
    PathTrace,
    downsized_paths,
    enumerate_downsized,
    materialize,
    meta_path_links,
    pair_paths,
    render_semantics,
)


def test_toy_schema_traces_and_pairs(toy_hin):
    traces = enumerate_downsized(toy_hin.schema, toy_hin.node_counts)
    assert traces[0].is_trivial
    assert {t.node_types for t in traces} == {("T",), ("T", "U"), ("T", "U", "C"), ("T", "S")}
    pairs = pair_paths(downsized_paths(toy_hin))
    assert len(pairs) == 3
    assert all(p.left == p.right for p in pairs)


@pytest.mark.parametrize("seed", range(60))
def test_enumeration_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    schema, counts = random_schema(rng, max_types=6)
    got = [(t.node_types, t.links) for t in enumerate_downsized(schema, counts)]
    assert len(got) == len(set(got))
    assert set(got) == brute_force_traces(schema, counts)


def test_single_type_schema_is_trivial_only():
    schema = HinSchema((("T", "target"),), ())
    assert enumerate_downsized(schema, {"T": 5}) == [PathTrace(("T",))]
    assert pair_paths([]) == []


def test_equal_counts_not_expanded():
    schema = HinSchema(
        (("T", "target"), ("A", "attribute"), ("B", "attribute")),
        (LinkType("ta", "T", "A", M2O), LinkType("ab", "A", "B", M2O), LinkType("ba", "B", "A", M2O)),
    )
    traces = enumerate_downsized(schema, {"T": 10, "A": 4, "B": 4})
    assert [t.node_types for t in traces] == [("T",), ("T", "A")]


def test_only_trivial_path_gives_no_pairs(toy_hin):
    paths = downsized_paths(toy_hin)[:1]
    assert pair_paths(paths) == []


def test_two_traces_same_end_give_four_ordered_pairs():
    schema = HinSchema(
        (("T", "target"), ("B", "attribute"), ("IP", "attribute")),
        (LinkType("tranIP", "T", "IP", M2O), LinkType("byB", "T", "B", M2O), LinkType("bIP", "B", "IP", M2O)),
    )
    counts = {"T": 50, "B": 20, "IP": 5}
    traces = enumerate_downsized(schema, counts)
    ip_traces = [k for k, t in enumerate(traces) if t.end_type == "IP"]
    assert len(ip_traces) == 2
    rng = np.random.default_rng(0)
    hin = make_hin(
        ["T", "B", "IP"],
        [("tranIP", "T", "IP", M2O), ("byB", "T", "B", M2O), ("bIP", "B", "IP", M2O)],
        counts,
        {
            "tranIP": (np.arange(50), rng.integers(0, 5, 50)),
            "byB": (np.arange(50), rng.integers(0, 20, 50)),
            "bIP": (np.arange(20), rng.integers(0, 5, 20)),
        },
    )
    pairs = [p for p in pair_paths(downsized_paths(hin)) if p.end_type == "IP"]
    assert len(pairs) == 4
    labels = [p.semantics_label for p in pairs]
    assert len(set(labels)) == 4


def test_render_source_pair():
    left = PathTrace(("transaction", "source"), ("fromSource",))
    assert render_semantics(left, left) == "transaction→fromSource→source→fromSource⁻¹→transaction"


def test_render_mirror_pairs_differ():
    a = PathTrace(("T", "IP"), ("tranIP",))
    b = PathTrace(("T", "B", "IP"), ("byB", "bIP"))
    assert render_semantics(a, b) != render_semantics(b, a)
    assert render_semantics(a, b) == "T→tranIP→IP→bIP⁻¹→B→byB⁻¹→T"


def _contains(seq: tuple, sub: tuple) -> bool:
    return any(seq[i : i + len(sub)] == sub for i in range(len(seq) - len(sub) + 1))


def test_no_pair_is_a_strict_subsequence_of_another(toy_hin):
    paths = downsized_paths(toy_hin)
    seqs = [meta_path_links(paths[p.left].trace, paths[p.right].trace) for p in pair_paths(paths)]
    for i, a in enumerate(seqs):
        for j, b in enumerate(seqs):
            if i != j:
                assert not (len(a) < len(b) and _contains(b, a)), (a, b)


def test_materialize_trivial_is_identity(toy_hin):
    p = materialize(toy_hin, PathTrace(("T",)))
    assert p.is_simple
    assert (p.matrix != sp.identity(100)).nnz == 0


def test_many_to_one_path_one_per_row(toy_hin):
    p = materialize(toy_hin, PathTrace(("T", "U", "C"), ("toU", "toC")))
    assert p.matrix.shape == (100, 3)
    assert p.is_simple
    assert np.array_equal(np.asarray(p.matrix.sum(axis=1)).ravel(), np.ones(100))


def test_simple_path_column_sums_count_transactions(toy_hin):
    p = materialize(toy_hin, PathTrace(("T", "U"), ("toU",)))
    users = toy_hin.adjacency("toU").tocoo().col
    assert np.array_equal(np.asarray(p.matrix.sum(axis=0)).ravel(), np.bincount(users, minlength=10))


def test_title_fixture_counts(title_hin):
    p = materialize(title_hin, PathTrace(("transaction", "item", "title"), ("containsItem", "isTitle")))
    assert not p.is_simple
    assert p.matrix.toarray().tolist() == [[2, 0], [1, 0], [0, 1], [1, 1]]


@pytest.mark.parametrize("seed", range(5))
def test_materialize_association_independent(seed):
    mats = [sp.random(8, 6, density=0.4, random_state=seed, format="csr"),
            sp.random(6, 5, density=0.4, random_state=seed + 1, format="csr"),
            sp.random(5, 3, density=0.4, random_state=seed + 2, format="csr")]
    mats = [(m > 0).astype(np.float64) for m in mats]
    left = (mats[0] @ mats[1]) @ mats[2]
    right = mats[0] @ (mats[1] @ mats[2])
    assert np.array_equal(left.toarray(), right.toarray())


def test_materialize_equals_dense_chain():
    synth = generate(GenConfig(n_transactions=400, n_users=200, n_ips=60, n_billings=40, n_items=30,
                               n_titles=10, n_countries=8, n_sources=5, n_currencies=4, n_account_types=3))
    hin = synth.dataset.hin
    for p in downsized_paths(hin):
        if p.trace.is_trivial:
            continue
        dense = np.eye(hin.n)
        for link in p.trace.links:
            dense = dense @ hin.adjacency(link).toarray()
        assert np.array_equal(p.matrix.toarray(), dense), str(p.trace)


def test_inverse_links_used_in_expansion():
    schema = HinSchema(
        (("T", "target"), ("A", "attribute"), ("B", "attribute")),
        (LinkType("ta", "T", "A", M2M), LinkType("ba", "B", "A", M2O)),
    )
    traces = enumerate_downsized(schema, {"T": 100, "A": 50, "B": 10})
    assert ("T", "A", "B") in {t.node_types for t in traces}
    assert any(t.links == ("ta", "ba⁻¹") for t in traces)
