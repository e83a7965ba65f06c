"""Structured relational attention over paths.

A k-hop path ``(j, r_1, ..., r_k, i)`` is scored as

    alpha = exp(f(type_j, s) + sum_t delta(r_t, s) + sum_t tau(r_t, r_t+1) + g(type_i, s))
          = beta(r_1..r_k, s) * gamma(type_j, type_i, s)

where f, g and delta are small MLPs fed a one-hot code concatenated with the
statement vector ``s``, and tau is an ``m x m`` transition table.  The score
is unnormalized; the encoder divides by the per-node sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BadRelationId, DimMismatch, InvalidPath
from .numkit import MLP, Rng, glorot_init
from .relgraph import N_NODE_TYPES, MultiRelGraph, NodeType


@dataclass
class AttentionParams:
    f_mlp: MLP
    g_mlp: MLP
    delta_mlp: MLP
    tau: np.ndarray  # tau[r-1, r'-1] scores the transition r -> r'

    @property
    def m(self) -> int:
        return self.tau.shape[0]

    @property
    def d_s(self) -> int:
        return self.f_mlp.n_in - N_NODE_TYPES

    @classmethod
    def init(cls, m: int, d_s: int, h_att: int, rng: Rng) -> "AttentionParams":
        return cls(
            f_mlp=MLP.init(N_NODE_TYPES + d_s, h_att, 1, rng),
            g_mlp=MLP.init(N_NODE_TYPES + d_s, h_att, 1, rng),
            delta_mlp=MLP.init(m + d_s, h_att, 1, rng),
            tau=glorot_init(m, m, rng),
        )

    @classmethod
    def zeros(cls, m: int, d_s: int, h_att: int) -> "AttentionParams":
        return cls(
            f_mlp=MLP.zeros(N_NODE_TYPES + d_s, h_att),
            g_mlp=MLP.zeros(N_NODE_TYPES + d_s, h_att),
            delta_mlp=MLP.zeros(m + d_s, h_att),
            tau=np.zeros((m, m)),
        )

    def neutralized(self, relation: bool = False, node: bool = False) -> "AttentionParams":
        """Copy with the chosen components replaced by zero networks (score 0)."""
        out = self
        if relation:
            h = self.delta_mlp.W1.shape[0]
            out = replace(out, delta_mlp=MLP.zeros(self.delta_mlp.n_in, h), tau=np.zeros_like(self.tau))
        if node:
            h_f, h_g = self.f_mlp.W1.shape[0], self.g_mlp.W1.shape[0]
            out = replace(out, f_mlp=MLP.zeros(self.f_mlp.n_in, h_f), g_mlp=MLP.zeros(self.g_mlp.n_in, h_g))
        return out

    def arrays(self):
        out = []
        for prefix, mlp in (("f", self.f_mlp), ("g", self.g_mlp), ("delta", self.delta_mlp)):
            out += [(f"{prefix}.{name}", a) for name, a in mlp.arrays()]
        out.append(("tau", self.tau))
        return out

    def to_json(self) -> dict:
        return {"f": self.f_mlp.to_json(), "g": self.g_mlp.to_json(),
                "delta": self.delta_mlp.to_json(), "tau": self.tau.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "AttentionParams":
        return cls(MLP.from_json(obj["f"]), MLP.from_json(obj["g"]), MLP.from_json(obj["delta"]),
                   np.asarray(obj["tau"], dtype=np.float64))


def _type_input(t, s, p: AttentionParams) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (p.d_s,):
        raise DimMismatch(f"statement vector must have shape ({p.d_s},), got {s.shape}")
    code = np.zeros(N_NODE_TYPES)
    code[NodeType(t)] = 1.0
    return np.concatenate([code, s])


def node_score_f(t, s, p: AttentionParams) -> float:
    return p.f_mlp.scalar(_type_input(t, s, p))


def node_score_g(t, s, p: AttentionParams) -> float:
    return p.g_mlp.scalar(_type_input(t, s, p))


def rel_score_delta(r: int, s, p: AttentionParams) -> float:
    if not 1 <= r <= p.m:
        raise BadRelationId(f"relation id {r} outside 1..{p.m}")
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (p.d_s,):
        raise DimMismatch(f"statement vector must have shape ({p.d_s},), got {s.shape}")
    code = np.zeros(p.m)
    code[r - 1] = 1.0
    return p.delta_mlp.scalar(np.concatenate([code, s]))


def beta(rels, s, p: AttentionParams) -> float:
    rels = list(rels)
    if not rels:
        raise ValueError("beta needs at least one relation")
    total = sum(rel_score_delta(r, s, p) for r in rels)
    total += sum(p.tau[a - 1, b - 1] for a, b in zip(rels, rels[1:]))
    return math.exp(total)


def gamma(t_src, t_dst, s, p: AttentionParams) -> float:
    return math.exp(node_score_f(t_src, s, p) + node_score_g(t_dst, s, p))


def alpha_path(path, graph: MultiRelGraph, s, p: AttentionParams) -> float:
    """Unnormalized weight of a walk; ``path`` needs source/rels/intermediates/target."""
    nodes = [path.source, *path.intermediates, path.target]
    if len(nodes) != len(path.rels) + 1:
        raise InvalidPath("intermediate count must be one less than the hop count")
    for u, r, v in zip(nodes, path.rels, nodes[1:]):
        if not graph.has_edge(u, r, v):
            raise InvalidPath(f"edge ({u}, {r}, {v}) is not in the graph")
    return beta(path.rels, s, p) * gamma(graph.phi[path.source], graph.phi[path.target], s, p)


def score_tables(s, p: AttentionParams):
    """All log-scores at once: f and g per node type, delta per relation, tau.

    Matches the scalar scorers up to rounding.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (p.d_s,):
        raise DimMismatch(f"statement vector must have shape ({p.d_s},), got {s.shape}")
    f = p.f_mlp.one_hot_outputs(N_NODE_TYPES, s)[:, 0]
    g = p.g_mlp.one_hot_outputs(N_NODE_TYPES, s)[:, 0]
    delta = p.delta_mlp.one_hot_outputs(p.m, s)[:, 0]
    return f, g, delta, p.tau
