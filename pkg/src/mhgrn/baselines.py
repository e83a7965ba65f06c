"""Reference encoders: RGCN, the 1-hop relation network, the K-hop relation
network, and a parameter setting under which the multi-hop encoder reproduces
the K-hop relation network exactly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .attention import AttentionParams
from .encoder import EncoderConfig, ModelParams
from .errors import DimMismatch, NoPath, NoTriples
from .numkit import MLP, Rng, activation
from .pathreason import enumerate_paths
from .relgraph import N_NODE_TYPES, MultiRelGraph, NodeType

# exp() of this underflows to exactly 0, which switches a message source/target off
NEG_LARGE = -1e30


def rgcn_layer(H, graph: MultiRelGraph, W_per_rel, sigma: str = "tanh") -> np.ndarray:
    """One relational graph convolution; ``W_per_rel[r - 1]`` transforms relation r.

    Each node averages the transformed features of all its in-neighbours over
    all relations; a node with no in-neighbours gets ``sigma(0)``.
    """
    H = np.asarray(H, dtype=np.float64)
    W = np.asarray(W_per_rel, dtype=np.float64)
    if W.ndim != 3 or H.shape != (graph.n, W.shape[2]):
        raise DimMismatch(f"features {H.shape} do not fit relation weights {W.shape}")
    m, d_out = W.shape[0], W.shape[1]
    src, rel, dst = graph.edge_arrays
    if len(rel) and rel.max() > m:
        raise DimMismatch(f"graph uses relation {rel.max()} but only {m} weight matrices given")
    # gather[i, (r - 1) * n + j] counts edges (j, r, i)
    gather = sparse.csr_array((np.ones(len(src)), (dst, (rel - 1) * graph.n + src)), shape=(graph.n, m * graph.n))
    transformed = np.matmul(H[None], W.transpose(0, 2, 1)).reshape(m * graph.n, d_out)
    out = gather @ transformed
    deg = np.bincount(dst, minlength=graph.n).astype(np.float64)
    out /= np.maximum(deg, 1.0)[:, None]
    return activation(sigma)(out)


def rgcn_stack(H, graph: MultiRelGraph, layers, sigma: str = "tanh") -> np.ndarray:
    for W in layers:
        H = rgcn_layer(H, graph, W, sigma)
    return H


def rn_encode(graph: MultiRelGraph, H, rel_emb, mlp: MLP) -> np.ndarray:
    """Mean over question->answer triples of ``mlp(h_j ++ e_r ++ h_i)``.

    ``rel_emb[r - 1]`` embeds relation r.
    """
    H = np.asarray(H, dtype=np.float64)
    rel_emb = np.asarray(rel_emb, dtype=np.float64)
    inputs = [
        np.concatenate([H[j], rel_emb[r - 1], H[i]])
        for j, r, i in graph.edges
        if graph.phi[j] == NodeType.Q and graph.phi[i] == NodeType.A
    ]
    if not inputs:
        raise NoTriples("no question->answer triple in the graph")
    return mlp(np.asarray(inputs)).mean(axis=0)


@dataclass
class RnParams:
    W_tilde: np.ndarray  # (d3, d1 + d2 + d1) = [W1 | W2 | W3]
    E_tilde: np.ndarray  # (m, d2); row r - 1 embeds relation r
    H_tilde: np.ndarray  # (n, d1)

    def __post_init__(self):
        d1, d2 = self.H_tilde.shape[1], self.E_tilde.shape[1]
        if self.W_tilde.shape[1] != 2 * d1 + d2:
            raise DimMismatch(f"W_tilde width {self.W_tilde.shape[1]} != 2*{d1} + {d2}")

    @property
    def d1(self) -> int:
        return self.H_tilde.shape[1]

    @property
    def d2(self) -> int:
        return self.E_tilde.shape[1]

    @property
    def d3(self) -> int:
        return self.W_tilde.shape[0]

    @property
    def m(self) -> int:
        return self.E_tilde.shape[0]

    @property
    def blocks(self):
        d1, d2 = self.d1, self.d2
        W = self.W_tilde
        return W[:, :d1], W[:, d1:d1 + d2], W[:, d1 + d2:]

    @classmethod
    def init(cls, n: int, m: int, d1: int, d2: int, d3: int, rng: Rng) -> "RnParams":
        return cls(
            W_tilde=rng.uniform_array((d3, 2 * d1 + d2), -1, 1),
            E_tilde=rng.uniform_array((m, d2), -1, 1),
            H_tilde=rng.uniform_array((n, d1), -1, 1),
        )

    def to_json(self) -> dict:
        return {"W_tilde": self.W_tilde.tolist(), "E_tilde": self.E_tilde.tolist(),
                "H_tilde": self.H_tilde.tolist(), "header": {"d1": self.d1, "d2": self.d2, "d3": self.d3, "m": self.m}}

    @classmethod
    def from_json(cls, obj: dict) -> "RnParams":
        h = obj["header"]
        n = len(obj["H_tilde"])
        return cls(
            np.asarray(obj["W_tilde"], dtype=np.float64).reshape(h["d3"], 2 * h["d1"] + h["d2"]),
            np.asarray(obj["E_tilde"], dtype=np.float64).reshape(h["m"], h["d2"]),
            np.asarray(obj["H_tilde"], dtype=np.float64).reshape(n, h["d1"]),
        )


def khop_rn(graph: MultiRelGraph, rn: RnParams, K: int) -> np.ndarray:
    """K-hop relation network by direct enumeration (small graphs only).

    A k-hop walk from a question node into answer node i is weighted by
    ``1 / (K * |A| * c_k(i))`` with ``c_k(i)`` the number of k-hop walks from
    question nodes into i.  Raises :class:`NoPath` when some answer node has
    no question walk of some length 1..K, since that weight is then undefined.
    """
    Q = graph.nodes_of(NodeType.Q)
    A = graph.nodes_of(NodeType.A)
    if not Q or not A:
        raise NoPath("need at least one question and one answer node")
    W1, W2, W3 = rn.blocks
    paths = enumerate_paths(graph, K, src_filter=Q, dst_filter=A)
    counts = {}
    for p in paths:
        counts[(p.k, p.target)] = counts.get((p.k, p.target), 0) + 1
    for i in A:
        for k in range(1, K + 1):
            if (k, i) not in counts:
                raise NoPath(f"answer node {i} has no {k}-hop walk from a question node")
    out = np.zeros(rn.d3)
    for p in paths:
        weight = 1.0 / (K * len(A) * counts[(p.k, p.target)])
        e = np.ones(rn.d2)
        for r in p.rels:
            e = e * rn.E_tilde[r - 1]
        feats = np.concatenate([rn.H_tilde[p.source], e, rn.H_tilde[p.target]])
        out += weight * (rn.W_tilde @ feats)
    return out


def _type_gate(open_type: NodeType, d_s: int, h_att: int) -> MLP:
    """MLP scoring 0 for ``open_type`` and about -1e30 for every other type."""
    mlp = MLP.zeros(N_NODE_TYPES + d_s, h_att)
    # hidden unit 0 = tanh(50 * [type != open_type]), which is exactly 0 or 1.0
    mlp.W1[0, :N_NODE_TYPES] = 50.0
    mlp.W1[0, int(open_type)] = 0.0
    mlp.W2[0, 0] = NEG_LARGE
    return mlp


def construct_equiv_params(rn: RnParams, K: int, d_s: int = 1, h_att: int = 1):
    """Encoder parameters and config whose pooled output equals ``khop_rn``.

    Node features are ``rn.H_tilde``.  ``x_j = [h_j; 1]``, every relation
    transform is ``diag(1 ++ e_r)`` so a walk's message becomes
    ``[h_j; e_r1 * ... * e_rk]``, relation attention is off, and node attention
    only lets messages flow from question to answer nodes.  The activation is
    the identity and hop attention and pooling are uniform.
    """
    d1, d2, d3, m = rn.d1, rn.d2, rn.d3, rn.m
    d = d1 + d2
    U1 = np.vstack([np.eye(d1), np.zeros((d2, d1))])
    b1 = np.concatenate([np.zeros(d1), np.ones(d2)])
    W = np.empty((K, m + 1, d, d))
    W[:, 0] = np.eye(d)
    for r in range(1, m + 1):
        W[:, r] = np.diag(np.concatenate([np.ones(d1), rn.E_tilde[r - 1]]))
    W1, W2, W3 = rn.blocks
    att = AttentionParams.zeros(m, d_s, h_att)
    att.f_mlp = _type_gate(NodeType.Q, d_s, h_att)
    att.g_mlp = _type_gate(NodeType.A, d_s, h_att)
    params = ModelParams(
        U=np.stack([U1] * N_NODE_TYPES),
        b=np.stack([b1] * N_NODE_TYPES),
        W=W,
        V=W3.copy(),
        Vp=np.hstack([W1, W2]),
        att=att,
        B_hop=np.zeros((d_s, d)),
        P_pool=np.zeros((d_s, d3)),
        rho=MLP.zeros(d_s + d3, 1),
        activation="identity",
    )
    config = EncoderConfig(K=K, use_type_transform=True, use_rel_attention=False,
                           use_node_attention=True, activation="identity")
    return params, config
