"""The multi-hop graph relation network forward pass.

Stages, in order:

1. type-specific affine transform of the node features,
2. k-hop message passing for k = 1..K, computed by a dynamic program over
   per-relation message matrices instead of enumerating paths,
3. per-node attention over hop counts,
4. shortcut connection and activation,
5. attentive pooling over answer-entity embeddings.

Row-vector convention throughout: ``X`` is ``n x d`` and a transform ``W``
acts as ``X @ W.T``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from .attention import AttentionParams, score_tables
from .errors import BadRelationId, DimMismatch, NoAnswerNodes, NonFinite, ParseError
from .numkit import MLP, Rng, activation, check_finite, glorot_init, softmax, softmax_rows
from .relgraph import N_NODE_TYPES, MultiRelGraph, NodeType

ABLATION_FLAGS = {
    "type-transform": "use_type_transform",
    "rel-attention": "use_rel_attention",
    "node-attention": "use_node_attention",
}


@dataclass
class EncoderConfig:
    K: int = 2
    use_type_transform: bool = True
    use_rel_attention: bool = True
    use_node_attention: bool = True
    activation: str = "tanh"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        activation(self.activation)

    def ablate(self, *flags: str) -> "EncoderConfig":
        """Copy with the named components (``type-transform``, ``rel-attention``,
        ``node-attention``) switched off."""
        changes = {}
        for flag in flags:
            if flag not in ABLATION_FLAGS:
                raise ValueError(f"unknown ablation {flag!r}; choose from {sorted(ABLATION_FLAGS)}")
            changes[ABLATION_FLAGS[flag]] = False
        return replace(self, **changes)


@dataclass
class ModelParams:
    U: np.ndarray        # (3, d, d_in), one per node type
    b: np.ndarray        # (3, d)
    W: np.ndarray        # (K, m + 1, d, d); W[t - 1, r], r = 0 is the padding transform
    V: np.ndarray        # (d_out, d_in)
    Vp: np.ndarray       # (d_out, d)
    att: AttentionParams
    B_hop: np.ndarray    # (d_s, d)
    P_pool: np.ndarray   # (d_s, d_out)
    rho: MLP             # (d_s + d_out) -> h_rho -> 1
    seed: int | None = None
    activation: str = "tanh"

    @property
    def d_in(self) -> int:
        return self.U.shape[2]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def d_out(self) -> int:
        return self.V.shape[0]

    @property
    def d_s(self) -> int:
        return self.B_hop.shape[0]

    @property
    def K(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.W.shape[1] - 1

    @property
    def h_att(self) -> int:
        return self.att.f_mlp.W1.shape[0]

    @property
    def h_rho(self) -> int:
        return self.rho.W1.shape[0]

    @classmethod
    def init(cls, *, d_in=32, d=32, d_out=32, d_s=16, K=2, m=34, h_att=16, h_rho=32,
             seed=13, activation="tanh") -> "ModelParams":
        rng = Rng(seed)
        U = np.stack([glorot_init(d, d_in, rng) for _ in range(N_NODE_TYPES)])
        b = np.stack([rng.uniform_array(d, -0.1, 0.1) for _ in range(N_NODE_TYPES)])
        W = np.stack([np.stack([glorot_init(d, d, rng) for _ in range(m + 1)]) for _ in range(K)])
        return cls(
            U=U,
            b=b,
            W=W,
            V=glorot_init(d_out, d_in, rng),
            Vp=glorot_init(d_out, d, rng),
            att=AttentionParams.init(m, d_s, h_att, rng),
            B_hop=glorot_init(d_s, d, rng),
            P_pool=glorot_init(d_s, d_out, rng),
            rho=MLP.init(d_s + d_out, h_rho, 1, rng),
            seed=seed,
            activation=activation,
        )

    def ablated(self, config: EncoderConfig) -> "ModelParams":
        """Swap disabled components for their neutral elements.

        Without the type transform every node uses the ``E_o`` pair (U, b);
        disabled attention components score 0 everywhere.
        """
        out = self
        if not config.use_type_transform:
            shared = int(NodeType.O)
            out = replace(out, U=np.broadcast_to(self.U[shared], self.U.shape),
                          b=np.broadcast_to(self.b[shared], self.b.shape))
        if not (config.use_rel_attention and config.use_node_attention):
            out = replace(out, att=self.att.neutralized(relation=not config.use_rel_attention,
                                                        node=not config.use_node_attention))
        return out

    def arrays(self):
        """Every learnable tensor as (name, array), in a fixed order."""
        out = [("U", self.U), ("b", self.b), ("W", self.W), ("V", self.V), ("Vp", self.Vp)]
        out += [(f"att.{name}", a) for name, a in self.att.arrays()]
        out += [("B_hop", self.B_hop), ("P_pool", self.P_pool)]
        out += [(f"rho.{name}", a) for name, a in self.rho.arrays()]
        return out

    @property
    def size(self) -> int:
        return sum(a.size for _, a in self.arrays())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.arrays()])

    def with_vector(self, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise DimMismatch(f"expected {self.size} parameters, got {vec.shape}")
        out = copy.deepcopy(self)
        offset = 0
        for _, a in out.arrays():
            a[...] = vec[offset:offset + a.size].reshape(a.shape)
            offset += a.size
        return out

    def header(self) -> dict:
        return {"d_in": self.d_in, "d": self.d, "d_out": self.d_out, "d_s": self.d_s, "K": self.K,
                "m": self.m, "h_att": self.h_att, "h_rho": self.h_rho,
                "activation": self.activation, "seed": self.seed}

    def to_json(self) -> dict:
        return {
            "header": self.header(),
            "U": self.U.tolist(), "b": self.b.tolist(), "W": self.W.tolist(),
            "V": self.V.tolist(), "Vp": self.Vp.tolist(),
            "att": self.att.to_json(),
            "B_hop": self.B_hop.tolist(), "P_pool": self.P_pool.tolist(),
            "rho": self.rho.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParams":
        try:
            h = obj["header"]

            def arr(key, shape):
                return np.asarray(obj[key], dtype=np.float64).reshape(shape)

            params = cls(
                U=arr("U", (N_NODE_TYPES, h["d"], h["d_in"])),
                b=arr("b", (N_NODE_TYPES, h["d"])),
                W=arr("W", (h["K"], h["m"] + 1, h["d"], h["d"])),
                V=arr("V", (h["d_out"], h["d_in"])),
                Vp=arr("Vp", (h["d_out"], h["d"])),
                att=AttentionParams.from_json(obj["att"]),
                B_hop=arr("B_hop", (h["d_s"], h["d"])),
                P_pool=arr("P_pool", (h["d_s"], h["d_out"])),
                rho=MLP.from_json(obj["rho"]),
                seed=h.get("seed"),
                activation=h.get("activation", "tanh"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed params JSON: {exc}") from exc
        if params.att.m != params.m or params.att.d_s != params.d_s:
            raise ParseError("attention parameter shapes disagree with the header")
        return params

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelParams":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        return cls.from_json(obj)


@dataclass
class EncoderOutput:
    X: np.ndarray             # (n, d)
    Z: np.ndarray             # (K, n, d), already normalized
    d_norm: np.ndarray        # (K, n)
    hop_weights: np.ndarray   # (n, K); zero on masked hops
    Hprime: np.ndarray        # (n, d_out)
    g_vec: np.ndarray         # (d_out,)
    pool_weights: np.ndarray  # (n,); zero off answer nodes
    config: EncoderConfig = field(default_factory=EncoderConfig)

    @property
    def hop_mask(self) -> np.ndarray:
        """(K, n) true where at least one k-hop path ends at the node."""
        return self.d_norm > 0


def type_transform(H, phi, params: ModelParams, config: EncoderConfig | None = None) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    phi = np.asarray([int(t) for t in phi], dtype=np.int64)
    if H.ndim != 2 or H.shape[0] != len(phi) or H.shape[1] != params.d_in:
        raise DimMismatch(f"features must be ({len(phi)}, {params.d_in}), got {H.shape}")
    if config is not None:
        params = params.ablated(config)
    return np.einsum("nij,nj->ni", params.U[phi], H) + params.b[phi]


def _relation_operator(graph: MultiRelGraph, m: int):
    """Sparse map over stacked (relation, node) rows: row r*n + i sums rows
    r*n + j over edges (j, r + 1, i)."""
    cache = graph.__dict__.setdefault("_relation_operators", {})
    if m not in cache:
        n = graph.n
        src, rel, dst = graph.edge_arrays
        if len(rel) and rel.max() > m:
            raise BadRelationId(f"graph uses relation {rel.max()} but the model has m = {m}")
        cache[m] = sparse.csr_array(
            (np.ones(len(src)), ((rel - 1) * n + dst, (rel - 1) * n + src)), shape=(m * n, m * n))
    return cache[m]


def padding_products(W: np.ndarray) -> np.ndarray:
    """``out[k - 1] = (W_0^K ... W_0^{k+1})^T`` as a right-multiplier; identity at k = K."""
    K, d = W.shape[0], W.shape[2]
    out = np.empty((K, d, d))
    out[K - 1] = np.eye(d)
    for k in range(K - 1, 0, -1):
        out[k - 1] = W[k, 0].T @ out[k]
    return out


def _propagate_hops(FX, op, e_delta, e_tau, G, W, W_hat):
    """Sum-product recursion over relation-indexed messages.

    The last column of ``FX`` carries the normalizer run: it is never touched
    by ``W`` or ``W_hat``, which is the same as re-running the recursion with
    identity transforms on an all-ones feature column.
    """
    m = len(e_delta)
    K = W.shape[0]
    n, c = FX.shape
    d = c - 1
    M = np.broadcast_to(FX, (m, n, c))
    out = np.empty((K, n, c))
    for k in range(1, K + 1):
        if k > 1:
            # S_r = sum_r' exp(tau(r', r)) M_r'
            M = (e_tau.T @ M.reshape(m, n * c)).reshape(m, n, c)
        M = M.copy()
        M[:, :, :d] = np.matmul(M[:, :, :d], W[k - 1, 1:].transpose(0, 2, 1))
        M = e_delta[:, None, None] * (op @ M.reshape(m * n, c)).reshape(m, n, c)
        agg = M.sum(axis=0)
        agg[:, :d] = agg[:, :d] @ W_hat[k - 1]
        out[k - 1] = G[:, None] * agg
    return out


def multihop_pass(X, graph: MultiRelGraph, s, params: ModelParams, K: int | None = None):
    """Normalized k-hop aggregates ``Z`` (K, n, d) and normalizers ``d`` (K, n).

    ``params`` is used as given; apply :meth:`ModelParams.ablated` first for
    ablations.  Nodes with no k-hop path get a zero row and ``d = 0``.
    """
    X = np.asarray(X, dtype=np.float64)
    K = params.K if K is None else K
    if K < 1 or K > params.K:
        raise DimMismatch(f"K = {K} outside 1..{params.K}")
    if X.shape != (graph.n, params.d):
        raise DimMismatch(f"X must be ({graph.n}, {params.d}), got {X.shape}")
    f, g, delta, tau = score_tables(s, params.att)
    with np.errstate(over="ignore"):
        F = np.exp(f[graph.phi_array])
        G = np.exp(g[graph.phi_array])
        e_delta = np.exp(delta)
        e_tau = np.exp(tau)
    if not (np.isfinite(F).all() and np.isfinite(G).all()
            and np.isfinite(e_delta).all() and np.isfinite(e_tau).all()):
        raise NonFinite("attention scores overflow exp()")
    op = _relation_operator(graph, params.m)
    W = params.W[:K]
    FX = F[:, None] * np.hstack([X, np.ones((graph.n, 1))])
    out = _propagate_hops(FX, op, e_delta, e_tau, G, W, padding_products(W))
    check_finite(out, "hop aggregates")
    Z, d_norm = out[:, :, :-1], out[:, :, -1]
    live = d_norm > 0
    safe = np.where(live, d_norm, 1.0)
    Z = np.where(live[:, :, None], Z / safe[:, :, None], 0.0)
    return Z, d_norm


def hop_attention(s, Z, d_norm, params: ModelParams):
    """Per-node softmax over hop counts of ``s^T B_hop z_i^k``; masked hops excluded."""
    s = np.asarray(s, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    K, n, d = Z.shape
    if s.shape != (params.d_s,) or d != params.d:
        raise DimMismatch("statement or hop aggregate width does not match the params")
    scores = Z @ (params.B_hop.T @ s)  # (K, n)
    live = np.asarray(d_norm) > 0
    weights = softmax_rows(scores.T, live.T)
    z = np.einsum("nk,knd->nd", weights, Z)
    return z, weights


def activate(H, z, params: ModelParams, sigma: str = "tanh") -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if H.shape[1] != params.d_in or z.shape != (H.shape[0], params.d):
        raise DimMismatch("feature or aggregate shape does not match the params")
    return activation(sigma)(H @ params.V.T + z @ params.Vp.T)


def pool_answer(Hprime, phi, s, params: ModelParams):
    Hprime = np.asarray(Hprime, dtype=np.float64)
    answers = [v for v, t in enumerate(phi) if t == NodeType.A]
    if not answers:
        raise NoAnswerNodes("graph has no answer-entity nodes")
    scores = Hprime[answers] @ (params.P_pool.T @ np.asarray(s, dtype=np.float64))
    w = softmax(scores)
    weights = np.zeros(len(phi))
    weights[answers] = w
    return w @ Hprime[answers], weights


def encode(graph: MultiRelGraph, H, s, params: ModelParams, config: EncoderConfig | None = None) -> EncoderOutput:
    config = config or EncoderConfig(K=params.K, activation=params.activation)
    eff = params.ablated(config)
    X = type_transform(H, graph.phi, eff)
    Z, d_norm = multihop_pass(X, graph, s, eff, config.K)
    z, hop_weights = hop_attention(s, Z, d_norm, eff)
    Hprime = activate(H, z, eff, config.activation)
    g_vec, pool_weights = pool_answer(Hprime, graph.phi, s, eff)
    return EncoderOutput(X, Z, d_norm, hop_weights, Hprime, g_vec, pool_weights, config)
