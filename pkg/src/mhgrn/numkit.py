"""Small numeric kernel shared by the rest of the package.

Matrices are plain ``float64`` numpy arrays; the helpers here add the shape
checks, masking rules and deterministic random streams the encoder relies on.

Random numbers come from :class:`Rng`, a xoshiro256** generator whose four
state words are seeded from a splitmix64 stream.  The exact recipe is::

    splitmix64(x):  x += 0x9E3779B97F4A7C15
                    z = x
                    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
                    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
                    return z ^ (z >> 31)

    next_u64():     result = rotl(s1 * 5, 7) * 9
                    t = s1 << 17
                    s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3
                    s2 ^= t;  s3 = rotl(s3, 45)

    uniform():      (next_u64() >> 11) * 2**-53          # in [0, 1)

with all arithmetic modulo 2**64, so any language reproduces the stream.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllMasked, DimMismatch, NonFinite, ParseError

_MASK64 = (1 << 64) - 1
FMAT_MAGIC = b"FMAT"


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """Deterministic xoshiro256** stream seeded through splitmix64."""

    def __init__(self, seed: int):
        x = seed & _MASK64
        state = []
        for _ in range(4):
            x, z = _splitmix64(x)
            state.append(z)
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0**-53)

    def uniform_array(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        count = int(np.prod(shape, dtype=np.int64))
        raw = np.fromiter(((self.next_u64() >> 11) for _ in range(count)), dtype=np.float64, count=count)
        return (low + (high - low) * (raw * 2.0**-53)).reshape(shape)

    def randint(self, n: int) -> int:
        """Integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        return int(self.uniform() * n)

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def check_finite(a, what: str = "value"):
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"non-finite entries in {what}")
    return a


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimMismatch(f"cannot multiply {a.shape} by {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    return check_finite(out, "matmul result")


def softmax(v, mask=None) -> np.ndarray:
    """Softmax over the entries where ``mask`` is true (all entries if None).

    Masked entries come back as exactly 0.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimMismatch("softmax needs a nonempty vector")
    mask = np.ones(v.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != v.shape:
        raise DimMismatch("mask shape differs from input")
    if not mask.any():
        raise AllMasked("every entry is masked")
    out = np.zeros_like(v)
    live = v[mask]
    e = np.exp(live - live.max())
    out[mask] = e / e.sum()
    return out


def softmax_rows(scores, mask) -> np.ndarray:
    """Row-wise masked softmax; fully masked rows come back as zeros."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    live_rows = mask.any(axis=1)
    masked = np.where(mask, scores, -np.inf)
    top = np.where(live_rows, masked.max(axis=1, initial=-np.inf), 0.0)
    e = np.where(mask, np.exp(np.where(mask, scores, 0.0) - top[:, None]), 0.0)
    total = e.sum(axis=1)
    return e / np.where(live_rows, total, 1.0)[:, None]


def log_softmax(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    shifted = v - v.max()
    return shifted - np.log(np.exp(shifted).sum())


def glorot_init(rows: int, cols: int, rng: Rng) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise DimMismatch("glorot_init needs rows, cols >= 1")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform_array((rows, cols), -bound, bound)


ACTIVATIONS = {
    "tanh": np.tanh,
    "identity": lambda x: x,
    "relu": lambda x: np.maximum(x, 0.0),
}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass
class MLP:
    """Two-layer perceptron ``W2 @ tanh(W1 @ x + b1) + b2``."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, n_in: int, n_hidden: int, n_out: int, rng: Rng) -> "MLP":
        return cls(
            W1=glorot_init(n_hidden, n_in, rng),
            b1=np.zeros(n_hidden),
            W2=glorot_init(n_out, n_hidden, rng),
            b2=np.zeros(n_out),
        )

    @classmethod
    def zeros(cls, n_in: int, n_hidden: int, n_out: int = 1) -> "MLP":
        return cls(np.zeros((n_hidden, n_in)), np.zeros(n_hidden), np.zeros((n_out, n_hidden)), np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.W1.shape[1]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise DimMismatch(f"MLP expects input width {self.n_in}, got {x.shape[-1]}")
        hidden = np.tanh(x @ self.W1.T + self.b1)
        return hidden @ self.W2.T + self.b2

    def one_hot_outputs(self, n_codes: int, s) -> np.ndarray:
        """Outputs for inputs ``onehot(c) ++ s``, c = 0..n_codes-1, without
        building the inputs: the one-hot part just selects a column of W1."""
        s = np.asarray(s, dtype=np.float64)
        if n_codes + s.shape[-1] != self.n_in:
            raise DimMismatch(f"MLP expects input width {self.n_in}, got {n_codes} + {s.shape[-1]}")
        shared = self.W1[:, n_codes:] @ s + self.b1
        hidden = np.tanh(self.W1[:, :n_codes].T + shared)
        return hidden @ self.W2.T + self.b2

    def scalar(self, x) -> float:
        return float(self(x)[0])

    def arrays(self):
        return [("W1", self.W1), ("b1", self.b1), ("W2", self.W2), ("b2", self.b2)]

    def to_json(self) -> dict:
        return {name: a.tolist() for name, a in self.arrays()}

    @classmethod
    def from_json(cls, obj: dict) -> "MLP":
        W1 = np.asarray(obj["W1"], dtype=np.float64)
        W2 = np.asarray(obj["W2"], dtype=np.float64)
        # zero-width layers serialize as [] and lose their shape
        if W1.size == 0:
            W1 = W1.reshape(0, 0)
        if W2.size == 0:
            W2 = W2.reshape(len(obj["b2"]), W1.shape[0])
        return cls(W1, np.asarray(obj["b1"], dtype=np.float64), W2, np.asarray(obj["b2"], dtype=np.float64))


def write_fmat(path, a) -> None:
    a = as_matrix(a)
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(FMAT_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_fmat(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != FMAT_MAGIC:
        raise ParseError(f"{path}: missing FMAT magic")
    rows, cols = struct.unpack("<II", raw[4:12])
    body = raw[12:]
    if len(body) != rows * cols * 8:
        raise ParseError(f"{path}: expected {rows * cols} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)


def read_csv_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"{path}: non-numeric entry", lineno) from None
    if rows and len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path}: ragged rows")
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), -1 if rows else 0)


def write_csv_matrix(path, a) -> None:
    a = as_matrix(a)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in a:
            writer.writerow([repr(float(x)) for x in row])


def read_matrix(path) -> np.ndarray:
    """Load a matrix from FMAT (sniffed by magic) or CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == FMAT_MAGIC:
        return read_fmat(path)
    return read_csv_matrix(path)
