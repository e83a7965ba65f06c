"""Multi-relational graphs: relation vocabulary, KG loading and subgraph extraction."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import BadRelationId, EmptyMentionSet, ParseError, UnknownRelation, UnlinkedEntity
from .numkit import Rng


class NodeType(IntEnum):
    Q = 0  # mentioned in the question
    A = 1  # mentioned in the answer option
    O = 2  # other (bridge) entity

    @property
    def tag(self) -> str:
        return "qao"[self]

    @classmethod
    def from_tag(cls, tag: str) -> "NodeType":
        try:
            return cls("qao".index(tag))
        except ValueError:
            raise ParseError(f"bad node tag {tag!r}") from None


N_NODE_TYPES = len(NodeType)

# Forward relations after merging.  The seven merge targets come from the
# ConceptNet merge table; the other ten are kept verbatim.
FORWARD_RELATIONS = (
    "antonym", "atlocation", "capableof", "causes", "createdby", "isa",
    "desires", "hassubevent", "partof", "hascontext", "hasproperty",
    "madeof", "notcapableof", "notdesires", "receivesaction", "relatedto",
    "usedfor",
)

# raw name -> (merged forward name, raw relation points the other way)
MERGE_TABLE = {
    "atlocation": ("atlocation", False),
    "locatednear": ("atlocation", False),
    "causes": ("causes", False),
    "causesdesire": ("causes", False),
    "motivatedbygoal": ("causes", True),
    "antonym": ("antonym", False),
    "distinctfrom": ("antonym", False),
    "hassubevent": ("hassubevent", False),
    "hasfirstsubevent": ("hassubevent", False),
    "haslastsubevent": ("hassubevent", False),
    "hasprerequisite": ("hassubevent", False),
    "entails": ("hassubevent", False),
    "mannerof": ("hassubevent", False),
    "isa": ("isa", False),
    "instanceof": ("isa", False),
    "definedas": ("isa", False),
    "partof": ("partof", False),
    "hasa": ("partof", True),
    "relatedto": ("relatedto", False),
    "similarto": ("relatedto", False),
    "synonym": ("relatedto", False),
}

REVERSE_MARKER = "*"


@dataclass(frozen=True)
class RelationVocab:
    """Merged relation names plus reverse relations.

    Forward relation ``f`` (0-based position in ``forward_names``) has id
    ``f + 1``; its reverse has id ``f + 1 + len(forward_names)``.  Id 0 is the
    padding relation and never labels an edge.
    """

    forward_names: tuple
    merge_map: dict = field(hash=False)

    def __post_init__(self):
        known = set(self.forward_names)
        for raw, (target, _) in self.merge_map.items():
            if target not in known:
                raise ValueError(f"merge target {target!r} for {raw!r} is not a forward relation")

    @classmethod
    def default(cls) -> "RelationVocab":
        merge = {name: (name, False) for name in FORWARD_RELATIONS}
        merge.update(MERGE_TABLE)
        return cls(FORWARD_RELATIONS, merge)

    @classmethod
    def from_json(cls, obj: dict) -> "RelationVocab":
        names = tuple(n.lower() for n in obj["forward_names"])
        merge = {n: (n, False) for n in names}
        for raw, (target, reversed_) in obj.get("merge_map", {}).items():
            merge[raw.lower()] = (target.lower(), bool(reversed_))
        return cls(names, merge)

    @classmethod
    def load(cls, path) -> "RelationVocab":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def n_forward(self) -> int:
        return len(self.forward_names)

    @property
    def m(self) -> int:
        return 2 * self.n_forward

    def forward_id(self, name: str) -> int:
        return self.forward_names.index(name) + 1

    def rev(self, r: int) -> int:
        if not 1 <= r <= self.m:
            raise BadRelationId(f"relation id {r} outside 1..{self.m}")
        return r + self.n_forward if r <= self.n_forward else r - self.n_forward

    def name(self, r: int) -> str:
        if not 1 <= r <= self.m:
            raise BadRelationId(f"relation id {r} outside 1..{self.m}")
        if r <= self.n_forward:
            return self.forward_names[r - 1]
        return REVERSE_MARKER + self.forward_names[r - 1 - self.n_forward]


def merge_relation(raw: str, vocab: RelationVocab) -> int:
    """Merged relation id for a raw ConceptNet relation name.

    A leading ``*`` denotes the reverse of the named relation, so
    ``*HasA`` is ``PartOf`` while ``HasA`` is the reverse of ``PartOf``.
    """
    name = raw.strip().lower()
    flip = False
    while name.startswith(REVERSE_MARKER):
        name = name[1:]
        flip = not flip
    if name.startswith("/r/"):
        name = name[3:]
    try:
        target, reversed_ = vocab.merge_map[name]
    except KeyError:
        raise UnknownRelation(raw) from None
    rid = vocab.forward_id(target)
    return vocab.rev(rid) if reversed_ != flip else rid


@dataclass(frozen=True)
class KGStore:
    vocab: RelationVocab
    entities: dict
    triples: tuple  # sorted, unique (head, relation, tail)

    @cached_property
    def names(self) -> list:
        out = [""] * len(self.entities)
        for name, idx in self.entities.items():
            out[idx] = name
        return out

    @cached_property
    def adjacency(self) -> dict:
        """head -> list of (relation, tail)."""
        adj = defaultdict(list)
        for h, r, t in self.triples:
            adj[h].append((r, t))
        return dict(adj)

    def link(self, name: str) -> int:
        """Exact lowercase match of a mention onto an entity id."""
        key = name.strip().lower()
        if key not in self.entities:
            raise UnlinkedEntity(name)
        return self.entities[key]


def load_kg(triple_file, vocab: RelationVocab | None = None) -> KGStore:
    """Read ``head<TAB>relation<TAB>tail`` lines and close them under reversal."""
    vocab = vocab or RelationVocab.default()
    entities: dict = {}
    triples = set()

    def entity(name):
        return entities.setdefault(name, len(entities))

    with open(triple_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise ParseError("expected head<TAB>relation<TAB>tail", lineno)
            head, raw_rel, tail = (p.strip() for p in parts)
            rid = merge_relation(raw_rel, vocab)
            h, t = entity(head.lower()), entity(tail.lower())
            if h == t:
                continue
            triples.add((h, rid, t))
            triples.add((t, vocab.rev(rid), h))
    return KGStore(vocab, entities, tuple(sorted(triples)))


@dataclass(frozen=True)
class MultiRelGraph:
    n: int
    phi: tuple
    m: int
    edges: tuple = ()
    node_kg_ids: tuple = ()

    def __post_init__(self):
        phi = tuple(NodeType(t) for t in self.phi)
        if len(phi) != self.n:
            raise ValueError(f"phi has length {len(phi)}, expected {self.n}")
        edges = set()
        for j, r, i in self.edges:
            j, r, i = int(j), int(r), int(i)
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {r}, {i}) has an endpoint outside 0..{self.n - 1}")
            if not 1 <= r <= self.m:
                raise BadRelationId(f"edge relation {r} outside 1..{self.m}")
            edges.add((j, r, i))
        kg_ids = tuple(self.node_kg_ids) if self.node_kg_ids else tuple(range(self.n))
        if len(kg_ids) != self.n:
            raise ValueError("node_kg_ids length differs from n")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "node_kg_ids", kg_ids)

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @cached_property
    def edge_arrays(self):
        """(src, rel, dst) as int arrays."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, empty
        arr = np.asarray(self.edges, dtype=np.int64)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    @cached_property
    def edges_by_rel(self) -> dict:
        out = {r: [] for r in range(1, self.m + 1)}
        for j, r, i in self.edges:
            out[r].append((j, i))
        return out

    @cached_property
    def out_edges(self) -> dict:
        """node -> list of (relation, target) in sorted order."""
        adj = defaultdict(list)
        for j, r, i in self.edges:
            adj[j].append((r, i))
        return dict(adj)

    @cached_property
    def phi_array(self) -> np.ndarray:
        return np.asarray([int(t) for t in self.phi], dtype=np.int64)

    def has_edge(self, j: int, r: int, i: int) -> bool:
        return (j, r, i) in self.edge_set

    def nodes_of(self, t: NodeType) -> list:
        return [v for v, p in enumerate(self.phi) if p == t]

    def type_counts(self) -> dict:
        return {t.tag: sum(1 for p in self.phi if p == t) for t in NodeType}

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "phi": [t.tag for t in self.phi],
            "kg_ids": list(self.node_kg_ids),
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_json(cls, obj: dict, default_m: int = 34) -> "MultiRelGraph":
        try:
            edges = [tuple(int(x) for x in e) for e in obj["edges"]]
            m = int(obj.get("m", max([default_m] + [e[1] for e in edges])))
            return cls(
                n=int(obj["n"]),
                phi=tuple(NodeType.from_tag(t) for t in obj["phi"]),
                m=m,
                edges=tuple(edges),
                node_kg_ids=tuple(int(x) for x in obj.get("kg_ids", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed graph JSON: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MultiRelGraph":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        return cls.from_json(obj)


def extract_subgraph(kg: KGStore, q_entities, a_entities) -> MultiRelGraph:
    """Mentions, every bridge on a <=2-hop path between two distinct mentions,
    and all KG edges among the resulting nodes (no pruning).

    Entities mentioned on both sides are tagged as answer entities.
    """
    a_set = set(a_entities)
    q_set = set(q_entities) - a_set
    mentions = q_set | a_set
    if not mentions:
        raise EmptyMentionSet("both mention sets are empty")

    adj = kg.adjacency
    bridges = set()
    for u in mentions:
        for _, x in adj.get(u, ()):
            if x in mentions:
                continue
            if any(w in mentions and w != u for _, w in adj.get(x, ())):
                bridges.add(x)

    order = sorted(q_set) + sorted(a_set) + sorted(bridges)
    local = {kg_id: v for v, kg_id in enumerate(order)}
    phi = [NodeType.Q] * len(q_set) + [NodeType.A] * len(a_set) + [NodeType.O] * len(bridges)
    edges = []
    for kg_id in order:
        for r, t in adj.get(kg_id, ()):
            if t in local:
                edges.append((local[kg_id], r, local[t]))
    return MultiRelGraph(len(order), tuple(phi), kg.vocab.m, tuple(edges), tuple(order))


# --- synthetic topologies -------------------------------------------------

def complete_graph(n: int, phi=None) -> MultiRelGraph:
    """All ordered pairs j != i under a single relation."""
    phi = phi or [NodeType.O] * n
    edges = [(j, 1, i) for j in range(n) for i in range(n) if i != j]
    return MultiRelGraph(n, tuple(phi), 1, tuple(edges))


def chain_graph(n: int, phi=None) -> MultiRelGraph:
    """v0 -> v1 -> ... under relation 1, with reverses under relation 2."""
    if phi is None:
        phi = [NodeType.O] * n
        if n >= 2:
            phi[0], phi[-1] = NodeType.Q, NodeType.A
    edges = []
    for v in range(n - 1):
        edges += [(v, 1, v + 1), (v + 1, 2, v)]
    return MultiRelGraph(n, tuple(phi), 2, tuple(edges))


def random_graph(n: int, m: int, mean_degree: float, rng: Rng, phi=None) -> MultiRelGraph:
    """About ``n * mean_degree`` distinct random edges (no self-loops).

    Node types, when not given, are drawn uniformly with at least one
    question and one answer node whenever ``n >= 2``.
    """
    if phi is None:
        phi = [NodeType(rng.randint(N_NODE_TYPES)) for _ in range(n)]
        if n >= 2:
            phi[0], phi[1] = NodeType.Q, NodeType.A
    target = min(int(round(n * mean_degree)), n * (n - 1) * m)
    edges = set()
    while len(edges) < target:
        j, i = rng.randint(n), rng.randint(n)
        if j != i:
            edges.add((j, 1 + rng.randint(m), i))
    return MultiRelGraph(n, tuple(phi), m, tuple(edges))


def synthetic_graph(spec: str, seed: int = 0) -> MultiRelGraph:
    """Build a graph from ``complete:n``, ``chain:n`` or ``erdos:n:deg:m``."""
    kind, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    try:
        if kind == "complete" and len(args) == 1:
            return complete_graph(int(args[0]))
        if kind == "chain" and len(args) == 1:
            return chain_graph(int(args[0]))
        if kind == "erdos" and len(args) == 3:
            return random_graph(int(args[0]), int(args[2]), float(args[1]), Rng(seed))
    except ValueError as exc:
        raise ParseError(f"bad synthetic graph spec {spec!r}: {exc}") from exc
    raise ParseError(f"bad synthetic graph spec {spec!r}")
