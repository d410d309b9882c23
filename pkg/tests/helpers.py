from __future__ import annotations

import numpy as np
from hinfraud.hin import Cardinality, Hin, HinSchema, LinkType

M2O = Cardinality.MANY_TO_ONE
M2M = Cardinality.MANY_TO_MANY


def make_hin(node_types, links, counts, edges) -> Hin:
    """Small in-memory HIN. ``node_types[0]`` is the target type."""
    schema = HinSchema(
        tuple((t, "target" if i == 0 else "attribute") for i, t in enumerate(node_types)),
        tuple(LinkType(*lk) for lk in links),
    )
    ids = {t: [f"{t}{i}" for i in range(counts[t])] for t in node_types}
    return Hin.from_index_edges(schema, ids, edges)


def random_hin(rng: np.random.Generator, n: int | None = None) -> Hin:
    """Random 3-5 type schema with mixed cardinalities, transactions largest."""
    n = n or int(rng.integers(20, 500))
    k = int(rng.integers(2, 5))
    sizes = sorted(set(int(v) for v in rng.integers(2, max(3, n // 2), size=k)), reverse=True)
    types = ["T"] + [f"A{i}" for i in range(len(sizes))]
    counts = {"T": n, **{f"A{i}": s for i, s in enumerate(sizes)}}
    links, edges = [], {}
    for i, s in enumerate(sizes):
        name = f"t{i}"
        if rng.random() < 0.3:
            src = rng.integers(0, n, size=2 * n)
            dst = rng.integers(0, s, size=2 * n)
            links.append((name, "T", f"A{i}", M2M))
        else:
            keep = rng.random(n) < 0.9
            src = np.arange(n)[keep]
            dst = rng.integers(0, s, size=n)[keep]
            links.append((name, "T", f"A{i}", M2O))
        edges[name] = (src, dst)
    for i in range(len(sizes) - 1):
        if rng.random() < 0.7:
            name = f"a{i}"
            src = np.arange(sizes[i])
            dst = rng.integers(0, sizes[i + 1], size=sizes[i])
            links.append((name, f"A{i}", f"A{i + 1}", M2O))
            edges[name] = (src, dst)
    return make_hin(types, links, counts, edges)


def random_schema(rng: np.random.Generator, max_types: int = 6) -> tuple[HinSchema, dict[str, int]]:
    """Arbitrary schema: random links in both directions, self-loops, parallel links and count ties."""
    k = int(rng.integers(1, max_types + 1))
    types = ["T"] + [f"A{i}" for i in range(k - 1)]
    counts = {t: int(rng.integers(1, 8)) for t in types}
    counts["T"] = int(rng.integers(5, 10))
    links = []
    for i in range(int(rng.integers(0, 2 * k + 1))):
        src, dst = (types[j] for j in rng.integers(0, k, size=2))
        card = [M2O, M2M, Cardinality.ONE_TO_ONE, Cardinality.ONE_TO_MANY][int(rng.integers(0, 4))]
        links.append(LinkType(f"l{i}", src, dst, card))
    schema = HinSchema(tuple((t, "target" if t == "T" else "attribute") for t in types), tuple(links))
    return schema, counts


def brute_force_traces(schema: HinSchema, counts: dict[str, int]) -> set[tuple]:
    """Depth-first enumeration of every strictly count-decreasing walk from the target type."""
    steps = []
    for lt in schema.link_types:
        steps.append((lt.name, lt.source, lt.target))
        steps.append((lt.name + "⁻¹", lt.target, lt.source))
    found = set()

    def walk(types: tuple, links: tuple) -> None:
        found.add((types, links))
        for name, src, dst in steps:
            if src == types[-1] and counts[dst] < counts[src]:
                walk(types + (dst,), links + (name,))

    walk((schema.target_type,), ())
    return found


# one (number, title, passed, detail) tuple per acceptance criterion, printed by conftest
ACCEPTANCE: list[tuple[int, str, bool, str]] = []
