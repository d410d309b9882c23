"""Synthetic payment-transaction network with planted fraud rings.

Transactions attach to users, billing accounts, IPs, items, sources and
currencies with Zipf-skewed popularity. A random subset of billing accounts
and IPs is marked risky: transactions touching one are fraudulent with the
ring probability, all others with the base rate. Ring frauds get only a weak
shift in their base features, so they look mostly normal on their own.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .data import Dataset, fmt, write_csv
from .errors import ConfigInvalid
from .hin import Cardinality, Hin, HinSchema, LinkType, TARGET, ATTRIBUTE
from .seeds import rng_for

M2O = Cardinality.MANY_TO_ONE
M2M = Cardinality.MANY_TO_MANY

# node type -> id prefix
ID_PREFIX = {
    "transaction": "t",
    "user": "u",
    "IP": "ip",
    "billing": "b",
    "item": "it",
    "title": "ti",
    "country": "c",
    "source": "s",
    "currency": "cur",
    "account_type": "at",
}

EA_LIKE_LINKS = (
    ("byUser", "transaction", "user", M2O),
    ("byBilling", "transaction", "billing", M2O),
    ("tranIP", "transaction", "IP", M2O),
    ("containsItem", "transaction", "item", M2M),
    ("fromSource", "transaction", "source", M2O),
    ("inCurrency", "transaction", "currency", M2O),
    ("billingIP", "billing", "IP", M2O),
    ("isTitle", "item", "title", M2O),
    ("userCountry", "user", "country", M2O),
    ("billingCountry", "billing", "country", M2O),
    ("binCountry", "billing", "country", M2O),
    ("accountType", "billing", "account_type", M2O),
)


def ea_like_schema() -> HinSchema:
    nodes = tuple((t, TARGET if t == "transaction" else ATTRIBUTE) for t in ID_PREFIX)
    return HinSchema(nodes, tuple(LinkType(*link) for link in EA_LIKE_LINKS))


def _default_zipf() -> dict[str, float]:
    return {
        "user": 0.5,
        "billing": 0.8,
        "IP": 0.8,
        "item": 1.0,
        "title": 0.8,
        "country": 1.0,
        "source": 0.0,
        "currency": 1.2,
        "account_type": 0.5,
    }


@dataclass(frozen=True)
class GenConfig:
    n_transactions: int = 20000
    n_users: int = 12000
    n_ips: int = 800
    n_billings: int = 500
    n_items: int = 300
    n_titles: int = 60
    n_countries: int = 30
    n_sources: int = 10
    n_currencies: int = 8
    n_account_types: int = 4
    zipf: dict = field(default_factory=_default_zipf)
    max_items_per_txn: int = 3
    tran_ip_is_billing_ip: float = 0.5
    fraud_base_rate: float = 0.05
    risky_billing_fraction: float = 0.05
    risky_ip_fraction: float = 0.05
    ring_fraud_probability: float = 0.9
    feature_dim: int = 20
    informative_dims: int = 5
    fraud_shift: float = 1.0
    ring_fraud_shift: float = 0.3
    timestamp_span: int = 8 * 7 * 86400
    seed: int = 42

    def __post_init__(self) -> None:
        counts = self.node_counts()
        if any(v < 1 for v in counts.values()):
            raise ConfigInvalid("all node counts must be >= 1")
        n = self.n_transactions
        if any(v >= n for k, v in counts.items() if k != "transaction"):
            raise ConfigInvalid("n_transactions must exceed every attribute count")
        for name in ("tran_ip_is_billing_ip", "fraud_base_rate", "risky_billing_fraction",
                     "risky_ip_fraction", "ring_fraud_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigInvalid(f"{name} must lie in [0, 1]")
        if self.max_items_per_txn < 1 or self.timestamp_span < 1:
            raise ConfigInvalid("max_items_per_txn and timestamp_span must be >= 1")
        if not 0 <= self.informative_dims <= self.feature_dim:
            raise ConfigInvalid("informative_dims must lie in [0, feature_dim]")
        unknown = set(self.zipf) - set(ID_PREFIX)
        if unknown:
            raise ConfigInvalid(f"zipf exponents for unknown node types {sorted(unknown)}")

    def node_counts(self) -> dict[str, int]:
        return {
            "transaction": self.n_transactions,
            "user": self.n_users,
            "IP": self.n_ips,
            "billing": self.n_billings,
            "item": self.n_items,
            "title": self.n_titles,
            "country": self.n_countries,
            "source": self.n_sources,
            "currency": self.n_currencies,
            "account_type": self.n_account_types,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigInvalid(f"unknown generator options {sorted(extra)}")
        d = dict(d)
        if "zipf" in d:
            d["zipf"] = {**_default_zipf(), **d["zipf"]}
        return cls(**d)


@dataclass
class SyntheticData:
    config: GenConfig
    dataset: Dataset
    risky: dict[str, np.ndarray]  # node type -> indices of risky entities
    ring_member: np.ndarray  # transaction touches a risky entity
    fraud_probability: np.ndarray


def _zipf_probs(k: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    p = 1.0 / np.arange(1, k + 1) ** exponent
    p /= p.sum()
    return p[rng.permutation(k)]


def generate(config: GenConfig) -> SyntheticData:
    counts = config.node_counts()
    n = config.n_transactions
    zipf = {**_default_zipf(), **config.zipf}
    pop_rng = rng_for(config.seed, "popularity")
    att_rng = rng_for(config.seed, "attachments")
    probs = {t: _zipf_probs(counts[t], zipf[t], pop_rng) for t in counts if t != "transaction"}

    def draw(t: str, size: int) -> np.ndarray:
        return att_rng.choice(counts[t], size=size, p=probs[t])

    txn = np.arange(n)
    user = draw("user", n)
    billing = draw("billing", n)
    billing_ip = draw("IP", counts["billing"])
    tran_ip = np.where(att_rng.random(n) < config.tran_ip_is_billing_ip, billing_ip[billing], draw("IP", n))
    source = draw("source", n)
    currency = draw("currency", n)
    n_items = att_rng.integers(1, config.max_items_per_txn + 1, size=n)
    cand = draw("item", n * config.max_items_per_txn).reshape(n, config.max_items_per_txn)
    take = np.arange(config.max_items_per_txn)[None, :] < n_items[:, None]
    item_pairs = np.unique(np.stack([np.repeat(txn, config.max_items_per_txn), cand.ravel()], 1)[take.ravel()], axis=0)
    title = draw("title", counts["item"])
    user_country = draw("country", counts["user"])
    billing_country = draw("country", counts["billing"])
    bin_country = draw("country", counts["billing"])
    account_type = draw("account_type", counts["billing"])

    risk_rng = rng_for(config.seed, "risk")
    risky = {
        "billing": np.sort(risk_rng.choice(counts["billing"], int(round(config.risky_billing_fraction * counts["billing"])), replace=False)),
        "IP": np.sort(risk_rng.choice(counts["IP"], int(round(config.risky_ip_fraction * counts["IP"])), replace=False)),
    }
    ring = np.isin(billing, risky["billing"]) | np.isin(tran_ip, risky["IP"])
    fraud_p = np.where(ring, config.ring_fraud_probability, config.fraud_base_rate)
    y = (rng_for(config.seed, "labels").random(n) < fraud_p).astype(np.int8)

    feat_rng = rng_for(config.seed, "features")
    X = feat_rng.standard_normal((n, config.feature_dim))
    shift = np.where(y == 1, np.where(ring, config.ring_fraud_shift, config.fraud_shift), 0.0)
    X[:, : config.informative_dims] += shift[:, None]
    ts = np.sort(rng_for(config.seed, "timestamps").integers(0, config.timestamp_span, size=n))

    schema = ea_like_schema()
    node_ids = {t: [f"{ID_PREFIX[t]}{i:0{len(str(counts[t] - 1))}d}" for i in range(counts[t])] for t in counts}
    edges = {
        "byUser": (txn, user),
        "byBilling": (txn, billing),
        "tranIP": (txn, tran_ip),
        "containsItem": (item_pairs[:, 0], item_pairs[:, 1]),
        "fromSource": (txn, source),
        "inCurrency": (txn, currency),
        "billingIP": (np.arange(counts["billing"]), billing_ip),
        "isTitle": (np.arange(counts["item"]), title),
        "userCountry": (np.arange(counts["user"]), user_country),
        "billingCountry": (np.arange(counts["billing"]), billing_country),
        "binCountry": (np.arange(counts["billing"]), bin_country),
        "accountType": (np.arange(counts["billing"]), account_type),
    }
    hin = Hin.from_index_edges(schema, node_ids, edges)
    return SyntheticData(config, Dataset(hin, X, y, ts), risky, ring, fraud_p)


def write_dataset(synth: SyntheticData, out_dir: str | Path) -> Path:
    """Write the generator output in the loader's file formats."""
    out = Path(out_dir)
    (out / "nodes").mkdir(parents=True, exist_ok=True)
    (out / "edges").mkdir(parents=True, exist_ok=True)
    ds = synth.dataset
    hin = ds.hin
    schema = hin.schema
    (out / "schema.yaml").write_text(yaml.safe_dump(schema.to_dict(), sort_keys=False, allow_unicode=True), encoding="utf-8")
    for t in schema.type_names:
        (out / "nodes" / f"{t}.txt").write_text("".join(f"{i}\n" for i in hin.node_ids[t]), encoding="utf-8")
    for lt in schema.link_types:
        A = hin.adjacency(lt.name).tocoo()
        src_ids, dst_ids = hin.node_ids[lt.source], hin.node_ids[lt.target]
        order = np.lexsort((A.col, A.row))
        lines = "".join(f"{src_ids[r]},{dst_ids[c]}\n" for r, c in zip(A.row[order], A.col[order]))
        (out / "edges" / f"{lt.name}.csv").write_text(lines, encoding="utf-8")
    txn_ids = ds.txn_ids
    write_csv(
        out / "features.csv",
        ["txn_id"] + [f"x_{k}" for k in range(ds.X.shape[1])],
        ([tid] + [fmt(v, 17) for v in row] for tid, row in zip(txn_ids, ds.X)),
    )
    write_csv(
        out / "labels.csv",
        ["transaction_id", "label", "timestamp"],
        ((tid, int(lbl), int(t)) for tid, lbl, t in zip(txn_ids, ds.y_true, ds.timestamps)),
    )
    planted = {
        "config": asdict(synth.config),
        "risky": {t: [hin.node_ids[t][i] for i in idx] for t, idx in synth.risky.items()},
        "risky_links": {"billing": "byBilling", "IP": "tranIP"},
        "ring_members": int(synth.ring_member.sum()),
    }
    (out / "planted.json").write_text(json.dumps(planted, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return out


def load_config(path: str | Path | None) -> GenConfig:
    if path is None:
        return GenConfig()
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return GenConfig.from_dict(data.get("generate", data))
