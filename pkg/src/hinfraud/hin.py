"""Typed heterogeneous information network stored as sparse 0/1 adjacency matrices."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import yaml

from .errors import CardinalityViolation, SchemaMismatch, UnknownLink, UnknownNodeId

log = logging.getLogger(__name__)

INVERSE_SUFFIX = "⁻¹"
TARGET = "target"
ATTRIBUTE = "attribute"


class Cardinality(str, Enum):
    MANY_TO_ONE = "many_to_one"
    ONE_TO_ONE = "one_to_one"
    MANY_TO_MANY = "many_to_many"
    ONE_TO_MANY = "one_to_many"

    def mirror(self) -> "Cardinality":
        if self is Cardinality.MANY_TO_ONE:
            return Cardinality.ONE_TO_MANY
        if self is Cardinality.ONE_TO_MANY:
            return Cardinality.MANY_TO_ONE
        return self

    @property
    def is_to_one(self) -> bool:
        return self in (Cardinality.MANY_TO_ONE, Cardinality.ONE_TO_ONE)


def inverse_name(name: str) -> str:
    if name.endswith(INVERSE_SUFFIX):
        return name[: -len(INVERSE_SUFFIX)]
    return name + INVERSE_SUFFIX


@dataclass(frozen=True)
class LinkType:
    name: str
    source: str
    target: str
    cardinality: Cardinality

    @property
    def is_inverse(self) -> bool:
        return self.name.endswith(INVERSE_SUFFIX)

    def inverse(self) -> "LinkType":
        return LinkType(inverse_name(self.name), self.target, self.source, self.cardinality.mirror())


@dataclass(frozen=True)
class HinSchema:
    """Node types (name, role) and declared link types.

    Exactly one node type has role ``target``; that is the transaction type.
    Inverse links are never declared, they are derived by :meth:`link`.
    """

    node_types: tuple[tuple[str, str], ...]
    link_types: tuple[LinkType, ...]
    _links: Mapping[str, LinkType] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = [n for n, _ in self.node_types]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate node type names: {names}")
        roles = [r for _, r in self.node_types]
        bad = [r for r in roles if r not in (TARGET, ATTRIBUTE)]
        if bad:
            raise SchemaMismatch(f"unknown node roles {bad}")
        if roles.count(TARGET) != 1:
            raise SchemaMismatch(f"exactly one target node type required, found {roles.count(TARGET)}")
        links: dict[str, LinkType] = {}
        for lt in self.link_types:
            if lt.is_inverse:
                raise SchemaMismatch(f"link name {lt.name!r} may not carry the inverse suffix")
            if lt.name in links:
                raise SchemaMismatch(f"duplicate link type {lt.name!r}")
            for end in (lt.source, lt.target):
                if end not in names:
                    raise SchemaMismatch(f"link {lt.name!r} references unknown node type {end!r}")
            links[lt.name] = lt
            links[inverse_name(lt.name)] = lt.inverse()
        object.__setattr__(self, "_links", MappingProxyType(links))

    @property
    def type_names(self) -> list[str]:
        return [n for n, _ in self.node_types]

    @property
    def target_type(self) -> str:
        return next(n for n, r in self.node_types if r == TARGET)

    def link(self, name: str) -> LinkType:
        try:
            return self._links[name]
        except KeyError:
            raise UnknownLink(f"unknown link type {name!r}") from None

    def all_links(self) -> list[LinkType]:
        """Declared links followed by their inverses, in declaration order."""
        return [lt for lt in self.link_types] + [lt.inverse() for lt in self.link_types]

    @classmethod
    def from_dict(cls, data: Mapping) -> "HinSchema":
        try:
            node_types = tuple((str(d["name"]), str(d.get("role", ATTRIBUTE))) for d in data["node_types"])
            link_types = tuple(
                LinkType(str(d["name"]), str(d["source"]), str(d["target"]), Cardinality(d["cardinality"]))
                for d in data.get("link_types") or ()
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatch(f"malformed schema: {exc}") from exc
        schema = cls(node_types, link_types)
        declared = data.get("target_type")
        if declared is not None and declared != schema.target_type:
            raise SchemaMismatch(f"target_type {declared!r} disagrees with role marking {schema.target_type!r}")
        return schema

    @classmethod
    def from_file(cls, path: str | Path) -> "HinSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        return {
            "target_type": self.target_type,
            "node_types": [{"name": n, "role": r} for n, r in self.node_types],
            "link_types": [
                {"name": lt.name, "source": lt.source, "target": lt.target, "cardinality": lt.cardinality.value}
                for lt in self.link_types
            ],
        }


def _freeze(mat: sp.csr_matrix) -> sp.csr_matrix:
    for arr in (mat.data, mat.indices, mat.indptr):
        arr.flags.writeable = False
    return mat


class Hin:
    """Immutable typed graph. One CSR matrix per link type and per derived inverse."""

    def __init__(self, schema: HinSchema, node_ids: Mapping[str, Iterable[str]], adjacency: Mapping[str, sp.spmatrix]):
        self.schema = schema
        self.node_ids: Mapping[str, tuple[str, ...]] = MappingProxyType(
            {t: tuple(node_ids[t]) for t in schema.type_names}
        )
        self.node_index: Mapping[str, Mapping[str, int]] = MappingProxyType(
            {t: MappingProxyType({v: i for i, v in enumerate(ids)}) for t, ids in self.node_ids.items()}
        )
        self.node_counts: Mapping[str, int] = MappingProxyType({t: len(ids) for t, ids in self.node_ids.items()})
        adj = {}
        for lt in schema.link_types:
            if lt.name not in adjacency:
                raise SchemaMismatch(f"no adjacency supplied for link {lt.name!r}")
            mat = sp.csr_matrix(adjacency[lt.name], dtype=np.float64, copy=True)
            expected = (self.node_counts[lt.source], self.node_counts[lt.target])
            if mat.shape != expected:
                raise SchemaMismatch(f"link {lt.name!r} has shape {mat.shape}, expected {expected}")
            mat.sum_duplicates()
            mat.eliminate_zeros()
            if mat.nnz and not np.all(mat.data == 1.0):
                raise SchemaMismatch(f"link {lt.name!r} is not a 0/1 matrix")
            _check_cardinality(lt, mat)
            mat.sort_indices()
            adj[lt.name] = _freeze(mat)
            adj[inverse_name(lt.name)] = _freeze(mat.T.tocsr())
        self._adjacency = MappingProxyType(adj)

    @classmethod
    def from_index_edges(
        cls,
        schema: HinSchema,
        node_ids: Mapping[str, Iterable[str]],
        edges: Mapping[str, tuple[np.ndarray, np.ndarray]],
    ) -> "Hin":
        """Build from integer (row, col) edge arrays. Duplicate edges collapse to a single 1."""
        counts = {t: len(tuple(node_ids[t])) for t in schema.type_names}
        adjacency = {}
        for lt in schema.link_types:
            src, dst = (np.asarray(a, dtype=np.int64) for a in edges.get(lt.name, ((), ())))
            mat = sp.coo_matrix(
                (np.ones(len(src)), (src, dst)), shape=(counts[lt.source], counts[lt.target])
            ).tocsr()
            dupes = mat.nnz and int((mat.data > 1).sum())
            if dupes:
                log.warning("link %s: %d duplicate edges collapsed", lt.name, dupes)
                mat.data[:] = 1.0
            adjacency[lt.name] = mat
        return cls(schema, node_ids, adjacency)

    @property
    def n(self) -> int:
        return self.node_counts[self.schema.target_type]

    def adjacency(self, link: str) -> sp.csr_matrix:
        try:
            return self._adjacency[link]
        except KeyError:
            raise UnknownLink(f"unknown link type {link!r}") from None

    def invert_link(self, link: str) -> str:
        return invert_link(self.schema, link)

    def degree_vector(self, link: str) -> np.ndarray:
        return degree_vector(self, link)


def invert_link(schema: HinSchema, link: str) -> str:
    """Name of the inverse link; its adjacency is the transpose."""
    schema.link(link)
    return inverse_name(link)


def degree_vector(hin: Hin, link: str) -> np.ndarray:
    mat = hin.adjacency(link)
    return np.diff(mat.indptr).astype(np.float64)


def _check_cardinality(lt: LinkType, mat: sp.csr_matrix) -> None:
    if not lt.cardinality.is_to_one:
        return
    per_row = np.diff(mat.indptr)
    bad = np.flatnonzero(per_row > 1)
    if bad.size:
        raise CardinalityViolation(lt.name, int(bad[0]))
    if lt.cardinality is Cardinality.ONE_TO_ONE:
        per_col = np.bincount(mat.indices, minlength=mat.shape[1])
        bad = np.flatnonzero(per_col > 1)
        if bad.size:
            raise CardinalityViolation(inverse_name(lt.name), int(bad[0]))


def _read_ids(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        ids = [line.rstrip("\n") for line in fh]
    ids = [i for i in ids if i]
    if len(set(ids)) != len(ids):
        raise SchemaMismatch(f"duplicate node ids in {path}")
    return ids


def load_hin(
    schema_file: str | Path,
    node_files: Mapping[str, str | Path],
    edge_files: Mapping[str, str | Path],
) -> Hin:
    """Read a schema, one id-per-line node file per type, and one ``src,dst`` file per link.

    Indices follow file line order. Unknown ids raise :class:`UnknownNodeId`.
    """
    schema = HinSchema.from_file(schema_file)
    missing = set(schema.type_names) - set(node_files)
    if missing:
        raise SchemaMismatch(f"no node file for types {sorted(missing)}")
    undeclared = set(edge_files) - {lt.name for lt in schema.link_types}
    if undeclared:
        raise SchemaMismatch(f"edge files for undeclared links {sorted(undeclared)}")
    node_ids = {t: _read_ids(node_files[t]) for t in schema.type_names}
    index = {t: {v: i for i, v in enumerate(ids)} for t, ids in node_ids.items()}
    edges = {}
    for lt in schema.link_types:
        if lt.name not in edge_files:
            raise SchemaMismatch(f"no edge file for link {lt.name!r}")
        src_index, dst_index = index[lt.source], index[lt.target]
        rows, cols = [], []
        with open(edge_files[lt.name], encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    s, d = line.split(",")
                except ValueError:
                    raise SchemaMismatch(f"{edge_files[lt.name]}: malformed edge line {line!r}") from None
                if s not in src_index:
                    raise UnknownNodeId(lt.name, s)
                if d not in dst_index:
                    raise UnknownNodeId(lt.name, d)
                rows.append(src_index[s])
                cols.append(dst_index[d])
        edges[lt.name] = (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))
    return Hin.from_index_edges(schema, node_ids, edges)


def dataset_paths(data_dir: str | Path, schema: HinSchema | None = None) -> tuple[Path, dict, dict]:
    """File layout used by the generator: schema.yaml, nodes/<type>.txt, edges/<link>.csv."""
    data_dir = Path(data_dir)
    schema_file = data_dir / "schema.yaml"
    if schema is None:
        schema = HinSchema.from_file(schema_file)
    nodes = {t: data_dir / "nodes" / f"{t}.txt" for t in schema.type_names}
    edges = {lt.name: data_dir / "edges" / f"{lt.name}.csv" for lt in schema.link_types}
    return schema_file, nodes, edges


def load_hin_dir(data_dir: str | Path) -> Hin:
    return load_hin(*dataset_paths(data_dir))
