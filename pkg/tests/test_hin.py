from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
import yaml

from helpers import make_hin
from hinfraud.errors import CardinalityViolation, SchemaMismatch, UnknownLink, UnknownNodeId
from hinfraud.hin import Cardinality, HinSchema, degree_vector, invert_link, load_hin

SCHEMA = {
    "target_type": "transaction",
    "node_types": [
        {"name": "transaction", "role": "target"},
        {"name": "source", "role": "attribute"},
        {"name": "item", "role": "attribute"},
    ],
    "link_types": [
        {"name": "fromSource", "source": "transaction", "target": "source", "cardinality": "many_to_one"},
        {"name": "containsItem", "source": "transaction", "target": "item", "cardinality": "many_to_many"},
    ],
}


def write_fixture(tmp_path: Path, edges: dict[str, str], schema=SCHEMA):
    (tmp_path / "schema.yaml").write_text(yaml.safe_dump(schema), encoding="utf-8")
    nodes = {"transaction": "t1\nt2\nt3\n", "source": "s1\ns2\n", "item": "a\nb\nc\n"}
    node_files, edge_files = {}, {}
    for t, body in nodes.items():
        p = tmp_path / f"{t}.txt"
        p.write_text(body, encoding="utf-8")
        node_files[t] = p
    for k, body in edges.items():
        p = tmp_path / f"{k}.csv"
        p.write_text(body, encoding="utf-8")
        edge_files[k] = p
    return tmp_path / "schema.yaml", node_files, edge_files


GOOD_EDGES = {"fromSource": "t1,s1\nt2,s1\nt3,s2\n", "containsItem": "t1,a\nt1,b\nt2,c\n"}


def test_load_well_formed(tmp_path):
    hin = load_hin(*write_fixture(tmp_path, GOOD_EDGES))
    assert dict(hin.node_counts) == {"transaction": 3, "source": 2, "item": 3}
    assert hin.adjacency("fromSource").shape == (3, 2)
    assert hin.adjacency("containsItem").toarray().tolist() == [[1, 1, 0], [0, 0, 1], [0, 0, 0]]
    inv = hin.adjacency(invert_link(hin.schema, "containsItem"))
    assert (inv != hin.adjacency("containsItem").T).nnz == 0
    # 2 declared + 2 inverses
    assert len(hin._adjacency) == 4


def test_indices_follow_file_order(tmp_path):
    hin = load_hin(*write_fixture(tmp_path, GOOD_EDGES))
    assert hin.node_index["item"]["c"] == 2
    assert hin.node_ids["transaction"] == ("t1", "t2", "t3")


def test_unknown_node_id(tmp_path):
    edges = dict(GOOD_EDGES, containsItem="t1,a\nt9,b\n")
    with pytest.raises(UnknownNodeId) as exc:
        load_hin(*write_fixture(tmp_path, edges))
    assert exc.value.link == "containsItem" and exc.value.node_id == "t9"


def test_cardinality_violation(tmp_path):
    edges = dict(GOOD_EDGES, fromSource="t1,s1\nt1,s2\nt2,s1\n")
    with pytest.raises(CardinalityViolation) as exc:
        load_hin(*write_fixture(tmp_path, edges))
    assert exc.value.link == "fromSource" and exc.value.row == 0


def test_duplicate_edges_collapse_with_warning(tmp_path, caplog):
    edges = dict(GOOD_EDGES, containsItem="t1,a\nt1,a\nt2,c\n")
    with caplog.at_level(logging.WARNING):
        hin = load_hin(*write_fixture(tmp_path, edges))
    assert hin.adjacency("containsItem")[0, 0] == 1.0
    assert "duplicate" in caplog.text


def test_schema_mismatch_cases():
    bad_endpoint = dict(SCHEMA, link_types=[{"name": "x", "source": "transaction", "target": "nope", "cardinality": "many_to_one"}])
    with pytest.raises(SchemaMismatch):
        HinSchema.from_dict(bad_endpoint)
    two_targets = dict(SCHEMA, node_types=[{"name": "transaction", "role": "target"}, {"name": "source", "role": "target"}])
    with pytest.raises(SchemaMismatch):
        HinSchema.from_dict(two_targets)
    dup = dict(SCHEMA, link_types=SCHEMA["link_types"] + [SCHEMA["link_types"][0]])
    with pytest.raises(SchemaMismatch):
        HinSchema.from_dict(dup)


def test_missing_edge_file_is_schema_mismatch(tmp_path):
    with pytest.raises(SchemaMismatch):
        load_hin(*write_fixture(tmp_path, {"fromSource": GOOD_EDGES["fromSource"]}))


def test_invert_link_involution_and_mirror():
    schema = HinSchema.from_dict(SCHEMA)
    inv = invert_link(schema, "fromSource")
    assert inv == "fromSource⁻¹"
    assert invert_link(schema, inv) == "fromSource"
    assert schema.link(inv).cardinality is Cardinality.ONE_TO_MANY
    assert schema.link(inv).source == "source" and schema.link(inv).target == "transaction"
    assert schema.link(invert_link(schema, "containsItem")).cardinality is Cardinality.MANY_TO_MANY
    with pytest.raises(UnknownLink):
        invert_link(schema, "nope")


def test_transpose_round_trip(toy_hin):
    for lt in toy_hin.schema.link_types:
        back = toy_hin.adjacency(invert_link(toy_hin.schema, lt.name)).T
        assert (back != toy_hin.adjacency(lt.name)).nnz == 0


def test_degree_vector_hand_counted(tmp_path):
    hin = make_hin(
        ["T", "A"], [("k", "T", "A", Cardinality.MANY_TO_MANY)], {"T": 4, "A": 3},
        {"k": (np.array([0, 1, 2, 2]), np.array([1, 0, 0, 2]))},
    )
    assert degree_vector(hin, "k").tolist() == [1, 1, 2, 0]


def test_degree_vector_many_to_one_all_ones(toy_hin):
    assert np.array_equal(degree_vector(toy_hin, "toU"), np.ones(100))


def test_adjacency_is_read_only(toy_hin):
    mat = toy_hin.adjacency("toU")
    with pytest.raises(ValueError):
        mat.data[0] = 5.0


def test_load_is_deterministic(tmp_path):
    a = load_hin(*write_fixture(tmp_path, GOOD_EDGES))
    b = load_hin(*write_fixture(tmp_path, GOOD_EDGES))
    for k in ("fromSource", "containsItem"):
        assert (a.adjacency(k) != b.adjacency(k)).nnz == 0
    assert a.node_ids == b.node_ids


def test_non_binary_adjacency_rejected():
    from hinfraud.hin import Hin

    schema = HinSchema.from_dict(SCHEMA)
    ids = {"transaction": ["t1", "t2", "t3"], "source": ["s1", "s2"], "item": ["a", "b", "c"]}
    adj = {"fromSource": sp.csr_matrix(np.array([[2.0, 0], [1, 0], [0, 1]])), "containsItem": sp.csr_matrix((3, 3))}
    with pytest.raises(SchemaMismatch):
        Hin(schema, ids, adj)
