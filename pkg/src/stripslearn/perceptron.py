"""Voted kernel perceptrons over trit vectors (linear, DNF and k-DNF kernels).

Kernel values are exact integers.  Arrays use ``int64`` while every reachable
sum provably fits, and fall back to Python integers (``object`` arrays)
otherwise, so ``2**same`` never overflows or rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

_INT64_SAFE = 2 ** 62
_BATCH = 1024


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "kdnf"
    k: int = 3

    def __post_init__(self):
        if self.kind not in ("linear", "dnf", "kdnf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "kdnf" and self.k < 1:
            raise ValueError("k-DNF kernel needs k >= 1")
        if self.kind != "kdnf":
            object.__setattr__(self, "k", 1)  # unused; normalised so equal kernels compare equal

    def value(self, s: int) -> int:
        if self.kind == "linear":
            return s
        if self.kind == "dnf":
            return 2 ** s
        return sum(comb(s, l) for l in range(self.k + 1))

    def __str__(self) -> str:
        return f"{self.k}dnf" if self.kind == "kdnf" else self.kind

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        text = text.strip().lower()
        if text in ("linear", "dnf"):
            return cls(text, 1)
        if text.endswith("dnf") and text[:-3].isdigit():
            return cls("kdnf", int(text[:-3]))
        if text.startswith("kdnf"):
            return cls("kdnf", int(text[4:].lstrip(":=") or 3))
        raise ValueError(f"cannot parse kernel {text!r}")


def kernel_table(spec: KernelSpec, n_bits: int, max_terms: int = 1) -> np.ndarray:
    """``table[s] == K`` for ``same == s``; dtype chosen so sums of ``max_terms`` values are exact."""
    values = [spec.value(s) for s in range(n_bits + 1)]
    if max(values) * max(max_terms, 1) < _INT64_SAFE:
        return np.array(values, dtype=np.int64)
    table = np.empty(n_bits + 1, dtype=object)
    table[:] = values
    return table


def same(x, y) -> int:
    """Positions where both trits are observed and equal."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    return int(np.count_nonzero((x == y) & (x != 0)))


def kernel_eval(spec: KernelSpec, x, y) -> int:
    return spec.value(same(x, y))


def same_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``out[i, j] = same(A[i], B[j])``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("length mismatch")
    pa, na = (A == 1).astype(np.float64), (A == -1).astype(np.float64)
    pb, nb = (B == 1).astype(np.float64), (B == -1).astype(np.float64)
    return (pa @ pb.T + na @ nb.T).astype(np.int64)


class SameRows:
    """Lazily computed, memoised rows of the ``same`` Gram matrix of ``X``.

    Shared between the classifiers of one action, since their inputs coincide.
    """

    def __init__(self, X: np.ndarray):
        X = np.asarray(X)
        self._pos = (X == 1).astype(np.float64)
        self._neg = (X == -1).astype(np.float64)
        self._rows: dict[int, np.ndarray] = {}

    def row(self, t: int) -> np.ndarray:
        r = self._rows.get(t)
        if r is None:
            r = (self._pos @ self._pos[t] + self._neg @ self._neg[t]).astype(np.int64)
            self._rows[t] = r
        return r


@dataclass
class VotedModel:
    """Mistake list of a voted perceptron; ``c`` holds survival counts."""

    kernel: KernelSpec
    X: np.ndarray  # (M, n) mistake vectors, in order of occurrence
    y: np.ndarray  # (M,) labels
    c: np.ndarray  # (M,) survival counts
    epochs: int = 1
    action: str = ""
    effect_bit: int = -1
    n_bits: int = field(default=0)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.int8).reshape(-1, self.n_bits or np.shape(self.X)[-1])
        self.n_bits = self.X.shape[1]
        self.y = np.asarray(self.y, dtype=np.int64)
        self.c = np.asarray(self.c, dtype=np.int64)
        self._table = kernel_table(self.kernel, self.n_bits, len(self.y))

    def __len__(self) -> int:
        return len(self.y)

    def _cumulative(self, Q: np.ndarray) -> np.ndarray:
        K = self._table[same_matrix(Q, self.X)]
        return np.cumsum(K * self.y, axis=1)

    def weights(self, Q) -> np.ndarray:
        """Voted score Σ_i c_i·sign(Σ_{j≤i} y_j K(x_j, q)) for each row of ``Q``; sign(0) = -1."""
        Q = np.atleast_2d(np.asarray(Q, dtype=np.int8))
        if Q.shape[1] != self.n_bits:
            raise ValueError(f"expected vectors of length {self.n_bits}, got {Q.shape[1]}")
        if len(self.y) == 0:
            return np.zeros(len(Q), dtype=np.int64)
        out = np.empty(len(Q), dtype=np.int64)
        for s in range(0, len(Q), _BATCH):
            cum = self._cumulative(Q[s:s + _BATCH])
            out[s:s + _BATCH] = np.where(cum > 0, 1, -1).astype(np.int64) @ self.c
        return out

    def weight(self, x) -> int:
        return int(self.weights(np.asarray(x)[None, :])[0])

    def predict(self, x) -> int:
        return 1 if self.weight(x) > 0 else -1

    def predict_many(self, Q, voted: bool = True) -> np.ndarray:
        """Labels for rows of ``Q``; ``voted=False`` uses only the final hypothesis."""
        Q = np.atleast_2d(np.asarray(Q, dtype=np.int8))
        if voted:
            return np.where(self.weights(Q) > 0, 1, -1)
        if len(self.y) == 0:
            return -np.ones(len(Q), dtype=np.int64)
        out = np.empty(len(Q), dtype=np.int64)
        for s in range(0, len(Q), _BATCH):
            K = self._table[same_matrix(Q[s:s + _BATCH], self.X)]
            out[s:s + _BATCH] = np.where((K * self.y).sum(axis=1) > 0, 1, -1)
        return out

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kernel": str(self.kernel),
            "epochs": self.epochs,
            "action": self.action,
            "effect_bit": self.effect_bit,
            "n_bits": self.n_bits,
            "mistakes": [[_encode_trits(x), int(y), int(c)] for x, y, c in zip(self.X, self.y, self.c)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VotedModel":
        rows = d["mistakes"]
        n = d["n_bits"]
        X = np.array([_decode_trits(r[0]) for r in rows], dtype=np.int8).reshape(-1, n)
        return cls(KernelSpec.parse(d["kernel"]), X, [r[1] for r in rows], [r[2] for r in rows],
                   d.get("epochs", 1), d.get("action", ""), d.get("effect_bit", -1), n)


def _encode_trits(x) -> str:
    return "".join("+" if v > 0 else "-" if v < 0 else "*" for v in x)


def _decode_trits(s: str) -> list[int]:
    return [1 if ch == "+" else -1 if ch == "-" else 0 for ch in s]


def train(X, y, spec: KernelSpec, epochs: int = 2, seed: int = 0, *,
          same_rows: Callable[[int], np.ndarray] | None = None, shuffle: bool = False,
          action: str = "", effect_bit: int = -1) -> VotedModel:
    """Voted perceptron training (Freund & Schapire) with α = 1 per mistake.

    ``same_rows(t)`` may supply precomputed ``same(X[t], X)`` rows.  Scores of all
    training rows are kept up to date on each mistake, so a correct prediction
    costs O(1).
    """
    X = np.asarray(X, dtype=np.int8)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("cannot train on an empty example list")
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (N, n) with one label per row")
    if not np.isin(y, (-1, 1)).all():
        raise ValueError("labels must be +1 or -1")
    n_ex = len(X)
    table = kernel_table(spec, X.shape[1], epochs * n_ex)
    if same_rows is None:
        same_rows = SameRows(X).row
    scores = np.zeros(n_ex, dtype=table.dtype)
    if table.dtype == object:
        scores[:] = 0
    rng = np.random.default_rng(seed)
    mistakes: list[int] = []
    counts: list[int] = []
    for _ in range(epochs):
        order = rng.permutation(n_ex) if shuffle else range(n_ex)
        for t in order:
            label = y[t]
            if (1 if scores[t] > 0 else -1) != label:
                mistakes.append(t)
                counts.append(1)
                k = table[same_rows(t)]
                if label > 0:
                    scores += k
                else:
                    scores -= k
            elif counts:
                counts[-1] += 1
    idx = np.array(mistakes, dtype=np.int64)
    return VotedModel(spec, X[idx].reshape(-1, X.shape[1]), y[idx], counts, epochs, action,
                      effect_bit, X.shape[1])


def weight(model: VotedModel, x) -> int:
    return model.weight(x)


def predict(model: VotedModel, x) -> int:
    return model.predict(x)


def positive_support_vectors(model: VotedModel, label_based: bool = False) -> list[np.ndarray]:
    """Distinct mistake vectors the final model labels +1, heaviest first.

    With ``label_based=True`` the mistake's own training label is used instead of
    the model's prediction.
    """
    if len(model) == 0:
        return []
    uniq = np.unique(model.X, axis=0)
    w = model.weights(uniq)
    if label_based:
        positive = {tuple(x) for x, lab in zip(model.X, model.y) if lab > 0}
        keep = [i for i in range(len(uniq)) if tuple(uniq[i]) in positive]
    else:
        keep = [i for i in range(len(uniq)) if w[i] > 0]
    keep.sort(key=lambda i: (-int(w[i]), tuple(int(v) for v in uniq[i])))
    return [uniq[i].copy() for i in keep]
