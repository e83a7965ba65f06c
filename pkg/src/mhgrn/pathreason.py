"""Explicit paths: enumeration, counting, the brute-force message oracle and
reasoning-path decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import alpha_path, score_tables
from .encoder import EncoderConfig, EncoderOutput, ModelParams, multihop_pass, type_transform
from .errors import CountOverflow, DimMismatch, NoPath
from .numkit import Rng
from .relgraph import MultiRelGraph, NodeType, random_graph

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class ReasoningPath:
    source: int
    rels: tuple
    intermediates: tuple
    target: int
    score: float | None = None

    @property
    def k(self) -> int:
        return len(self.rels)

    @property
    def nodes(self) -> tuple:
        return (self.source, *self.intermediates, self.target)

    def sort_key(self):
        return (self.k, self.source, self.rels, self.intermediates, self.target)

    def to_json(self, rel_name=None) -> dict:
        rel_name = rel_name or str
        return {
            "source": self.source,
            "rels": [rel_name(r) for r in self.rels],
            "intermediates": list(self.intermediates),
            "target": self.target,
            "score": self.score,
            "k": self.k,
        }


def enumerate_paths(graph: MultiRelGraph, K: int, src_filter=None, dst_filter=None) -> list:
    """Every walk of 1..K hops, ordered by (k, source, rels, intermediates, target)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    src_filter = None if src_filter is None else set(src_filter)
    dst_filter = None if dst_filter is None else set(dst_filter)
    out_edges = graph.out_edges
    found = []

    def walk(source, rels, nodes):
        last = nodes[-1]
        for r, nxt in out_edges.get(last, ()):
            rels2, nodes2 = rels + (r,), nodes + (nxt,)
            if dst_filter is None or nxt in dst_filter:
                found.append(ReasoningPath(source, rels2, nodes2[1:-1], nxt))
            if len(rels2) < K:
                walk(source, rels2, nodes2)

    for source in range(graph.n):
        if src_filter is None or source in src_filter:
            walk(source, (), (source,))
    found.sort(key=ReasoningPath.sort_key)
    return found


def count_paths(graph: MultiRelGraph, K: int) -> list:
    """Walk counts per length, ``1^T A^k 1`` with A the relation-summed adjacency.

    Uses exact integers; raises :class:`CountOverflow` past the signed 64-bit range.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    A = np.zeros((graph.n, graph.n), dtype=object)
    A[:] = 0
    for j, _, i in graph.edges:
        A[i, j] += 1
    v = np.array([1] * graph.n, dtype=object)
    counts = []
    for k in range(1, K + 1):
        v = A.dot(v) if graph.n else v
        total = int(sum(v))
        if total > INT64_MAX:
            raise CountOverflow(f"{k}-hop walk count exceeds 64 bits")
        counts.append(total)
    return counts


def brute_force_zk(graph: MultiRelGraph, X, s, params: ModelParams, k: int):
    """Literal evaluation of the k-hop message for every node.

    Each k-hop walk contributes ``alpha * W_0^K .. W_0^{k+1} W_{r_k}^k .. W_{r_1}^1 x_j``
    to its end node; rows are divided by the summed alpha.  Returns ``(Z^k, d^k)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (graph.n, params.d):
        raise DimMismatch(f"X must be ({graph.n}, {params.d}), got {X.shape}")
    if not 1 <= k <= params.K:
        raise DimMismatch(f"k = {k} outside 1..{params.K}")
    K = params.K
    Z = np.zeros((graph.n, params.d))
    d = np.zeros(graph.n)
    for path in enumerate_paths(graph, k):
        if path.k != k:
            continue
        alpha = alpha_path(path, graph, s, params.att)
        msg = X[path.source]
        for t, r in enumerate(path.rels, start=1):
            msg = params.W[t - 1, r] @ msg
        for t in range(k + 1, K + 1):
            msg = params.W[t - 1, 0] @ msg
        Z[path.target] += alpha * msg
        d[path.target] += alpha
    live = d > 0
    Z[live] /= d[live, None]
    return Z, d


def _argmax_first(values, candidates):
    """Candidate with the largest value; earliest candidate wins ties."""
    best = None
    for c in candidates:
        if best is None or values[c] > values[best]:
            best = c
    return best


def viterbi_path(graph: MultiRelGraph, target: int, k: int, s, params: ModelParams) -> ReasoningPath:
    """Highest-alpha k-hop walk ending at ``target`` by max-product over
    (relation, node) states.

    Exact score ties go to the walk that sorts first in :func:`enumerate_paths`
    order; that order is preserved when two partial walks are extended by the
    same hop, so keeping the smallest key per state is enough.
    """
    f, g, delta, tau = score_tables(s, params.att)
    phi = graph.phi
    # state (r, v) -> (log score, (source, rels, intermediates))
    layer = {}
    for j, r, v in graph.edges:
        cand = (f[phi[j]] + delta[r - 1], (j, (r,), ()))
        _keep_best(layer, (r, v), cand)
    for _ in range(k - 1):
        nxt = {}
        for (r_prev, u), (score, (j, rels, inters)) in layer.items():
            for r, v in graph.out_edges.get(u, ()):
                cand = (score + tau[r_prev - 1, r - 1] + delta[r - 1], (j, rels + (r,), inters + (u,)))
                _keep_best(nxt, (r, v), cand)
        layer = nxt
    best = None
    for (r, v), (score, key) in layer.items():
        if v == target:
            cand = (score + g[phi[target]], key)
            if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                best = cand
    if best is None:
        raise NoPath(f"no {k}-hop path ends at node {target}")
    j, rels, inters = best[1]
    path = ReasoningPath(j, rels, inters, target)
    return ReasoningPath(j, rels, inters, target, alpha_path(path, graph, s, params.att))


def _keep_best(table, state, cand):
    cur = table.get(state)
    if cur is None or cand[0] > cur[0] or (cand[0] == cur[0] and cand[1] < cur[1]):
        table[state] = cand


def decode_path(graph: MultiRelGraph, output: EncoderOutput, s, params: ModelParams,
                config: EncoderConfig | None = None) -> ReasoningPath:
    """Evidence path for an encoding: top pooled answer node, its top-weighted
    hop count, then the best-scoring walk of that length into it."""
    config = config or output.config
    eff = params.ablated(config)
    answers = graph.nodes_of(NodeType.A)
    if not answers:
        raise NoPath("graph has no answer nodes")
    i_star = _argmax_first(output.pool_weights, answers)
    live = [k for k in range(output.hop_weights.shape[1]) if output.d_norm[k, i_star] > 0]
    if not live:
        raise NoPath(f"no path of length <= {config.K} ends at answer node {i_star}")
    k_star = _argmax_first(output.hop_weights[i_star], live) + 1
    return viterbi_path(graph, i_star, k_star, s, eff)


def oracle_trial(seed: int, n: int, m: int, K: int, mean_degree: float = 3.5, dim: int = 4, d_s: int = 3):
    """Random graph and parameters; max abs gap between the dynamic program and
    the brute-force sum, over all hops, for ``(Z, d)``."""
    rng = Rng(seed)
    graph = random_graph(n, m, min(mean_degree, m * (n - 1)), rng)
    params = ModelParams.init(d_in=dim, d=dim, d_out=dim, d_s=d_s, K=K, m=m, h_att=4, seed=seed)
    H = rng.uniform_array((n, dim), -1, 1)
    s = rng.uniform_array(d_s, -1, 1)
    X = type_transform(H, graph.phi, params)
    Z, d = multihop_pass(X, graph, s, params)
    z_gap = d_gap = 0.0
    for k in range(1, K + 1):
        Zb, db = brute_force_zk(graph, X, s, params, k)
        z_gap = max(z_gap, float(np.abs(Z[k - 1] - Zb).max(initial=0.0)))
        d_gap = max(d_gap, float(np.abs(d[k - 1] - db).max(initial=0.0)))
    return z_gap, d_gap
