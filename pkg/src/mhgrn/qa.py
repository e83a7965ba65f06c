"""Multiple-choice scoring on top of the graph encoder, plus a small
finite-difference trainer for desk-scale experiments."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, ModelParams, encode
from .errors import DimMismatch, IndexOutOfRange, ParamBudgetExceeded, ParseError
from .numkit import Rng, read_matrix
from .relgraph import MultiRelGraph, NodeType

DEFAULT_PARAM_CAP = 5000


@dataclass
class QaInstance:
    statements: list   # one s vector per option
    graphs: list       # one MultiRelGraph per option
    features: list     # one (n, d_in) matrix per option
    correct: int

    def __post_init__(self):
        n_opt = len(self.statements)
        if n_opt < 2:
            raise IndexOutOfRange("an instance needs at least two options")
        if len(self.graphs) != n_opt or len(self.features) != n_opt:
            raise DimMismatch("statements, graphs and features must have one entry per option")
        if not 0 <= self.correct < n_opt:
            raise IndexOutOfRange(f"correct index {self.correct} outside 0..{n_opt - 1}")

    @property
    def n_options(self) -> int:
        return len(self.statements)

    @classmethod
    def load(cls, path) -> "QaInstance":
        """Read the instance JSON; option file paths are relative to it."""
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            statements, graphs, features = [], [], []
            for opt in obj["options"]:
                statements.append(read_matrix(path.parent / opt["s_csv"]).ravel())
                graphs.append(MultiRelGraph.load(path.parent / opt["graph_json"]))
                features.append(read_matrix(path.parent / opt["features"]))
            correct = int(obj["correct"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: malformed instance: {exc}") from exc
        return cls(statements, graphs, features, correct)


def plausibility(s, g_vec, params: ModelParams) -> float:
    x = np.concatenate([np.asarray(s, dtype=np.float64), np.asarray(g_vec, dtype=np.float64)])
    if x.shape != (params.rho.n_in,):
        raise DimMismatch(f"scorer expects {params.rho.n_in} inputs, got {x.shape[0]}")
    return params.rho.scalar(x)


def qa_loss(scores, correct: int) -> float:
    """Cross-entropy of the correct option under a softmax over option scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or len(scores) < 2:
        raise IndexOutOfRange("need at least two option scores")
    if not 0 <= correct < len(scores):
        raise IndexOutOfRange(f"correct index {correct} outside 0..{len(scores) - 1}")
    # log(1 + sum_{a != c} exp(s_a - s_c)); log1p keeps tiny losses positive
    others = np.delete(scores - scores[correct], correct)
    top = others.max()
    if top > 0:
        return float(top + np.log(np.exp(-top) + np.exp(others - top).sum()))
    return float(np.log1p(np.exp(others).sum()))


def option_scores(instance: QaInstance, params: ModelParams, config: EncoderConfig | None = None) -> np.ndarray:
    out = []
    for s, graph, H in zip(instance.statements, instance.graphs, instance.features):
        g_vec = encode(graph, H, s, params, config).g_vec
        out.append(plausibility(s, g_vec, params))
    return np.asarray(out)


def predict(instance: QaInstance, params: ModelParams, config: EncoderConfig | None = None) -> int:
    """Index of the highest-scoring option; ties go to the lowest index."""
    return int(np.argmax(option_scores(instance, params, config)))


def batch_loss(params: ModelParams, batch, config: EncoderConfig | None = None) -> float:
    return float(np.mean([qa_loss(option_scores(inst, params, config), inst.correct) for inst in batch]))


def accuracy(params: ModelParams, batch, config: EncoderConfig | None = None) -> float:
    return float(np.mean([predict(inst, params, config) == inst.correct for inst in batch]))


def fd_gradient(params: ModelParams, batch, config: EncoderConfig | None = None, eps: float = 1e-5,
                indices=None) -> np.ndarray:
    """Central differences of the mean batch loss w.r.t. flat parameter ``indices``
    (all parameters by default).  ``params`` is perturbed in place and restored."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    arrays = [a for _, a in params.arrays()]
    offsets = np.cumsum([0] + [a.size for a in arrays])
    indices = range(offsets[-1]) if indices is None else indices
    grads = []
    for p in indices:
        slot = int(np.searchsorted(offsets, p, side="right")) - 1
        flat = arrays[slot].reshape(-1)  # view; arrays are contiguous
        original = flat[p - offsets[slot]]
        flat[p - offsets[slot]] = original + eps
        up = batch_loss(params, batch, config)
        flat[p - offsets[slot]] = original - eps
        down = batch_loss(params, batch, config)
        flat[p - offsets[slot]] = original
        grads.append((up - down) / (2 * eps))
    return np.asarray(grads)


def fd_train_step(params: ModelParams, batch, eps: float = 1e-5, lr: float = 0.05,
                  config: EncoderConfig | None = None, max_params: int = DEFAULT_PARAM_CAP):
    """One full-batch gradient step with a finite-difference gradient.

    Returns ``(new_params, loss_before)``; ``params`` itself is left unchanged.
    """
    if lr < 0:
        raise ValueError("lr must be non-negative")
    if params.size > max_params:
        raise ParamBudgetExceeded(f"{params.size} parameters exceed the cap of {max_params}")
    loss_before = batch_loss(params, batch, config)
    if lr == 0:
        return params.with_vector(params.to_vector()), loss_before
    grad = fd_gradient(params, batch, config, eps)
    return params.with_vector(params.to_vector() - lr * grad), loss_before


TOY_DIMS = dict(d_in=3, d=3, d_out=3, d_s=2, K=2, m=2, h_att=2, h_rho=4)


def toy_task(n_instances: int = 20, seed: int = 13) -> list:
    """Two-option instances over 3-node graphs (question, answer, other node).

    The correct option links question -> answer with relation 1 (plus the
    reverse, relation 2); the wrong option links other -> answer instead.
    Features and statement vectors are random and carry no label signal.
    """
    rng = Rng(seed)
    phi = (NodeType.Q, NodeType.A, NodeType.O)
    right = MultiRelGraph(3, phi, 2, ((0, 1, 1), (1, 2, 0)))
    wrong = MultiRelGraph(3, phi, 2, ((2, 1, 1), (1, 2, 2)))
    d_in, d_s = TOY_DIMS["d_in"], TOY_DIMS["d_s"]
    out = []
    for _ in range(n_instances):
        correct = rng.randint(2)
        graphs = [wrong, wrong]
        graphs[correct] = right
        out.append(QaInstance(
            statements=[rng.uniform_array(d_s, -1, 1) for _ in range(2)],
            graphs=graphs,
            features=[rng.uniform_array((3, d_in), -1, 1) for _ in range(2)],
            correct=correct,
        ))
    return out
