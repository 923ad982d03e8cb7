"""Synthetic sequence datasets with hidden labels following a known prior.

Generators are pure functions of their arguments and a 64-bit seed (PCG64
streams, split per purpose), so every dataset is reproducible.  A
:class:`SequenceDataset` is immutable after construction; training code only
ever reads it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import FormatError
from .ngram import Vocabulary


class SequenceDataset:
    """A collection of feature sequences with optional per-position labels.

    features : list of (T_n, d) float arrays
    labels   : parallel list of (T_n,) int arrays, or None (unlabeled)
    vocab    : class vocabulary; labels are ids below ``vocab.size``
    """

    def __init__(
        self,
        features: Sequence[np.ndarray],
        vocab: Vocabulary,
        labels: Sequence[np.ndarray] | None = None,
    ):
        if not features:
            raise ValueError("dataset needs at least one sequence")
        feats = []
        d = np.asarray(features[0], dtype=np.float64).shape[-1]
        for x in features:
            x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
            if x.ndim != 2 or x.shape[1] != d:
                raise ValueError(f"feature sequence shape {x.shape}, expected (*, {d})")
            x.setflags(write=False)
            feats.append(x)
        self.features: list[np.ndarray] = feats
        self.vocab = vocab
        self.d = int(d)
        if labels is not None:
            labs = []
            for x, y in zip(feats, labels, strict=True):
                y = np.asarray(y, dtype=np.int64)
                if y.shape != (len(x),):
                    raise ValueError("label sequence length mismatch")
                if y.size and (y.min() < 0 or y.max() >= vocab.size):
                    raise ValueError(f"label id out of range [0, {vocab.size})")
                y.setflags(write=False)
                labs.append(y)
            self.labels: list[np.ndarray] | None = labs
        else:
            self.labels = None
        self._stacked: np.ndarray | None = None
        self._windows: dict[int, np.ndarray] = {}

    @property
    def num_sequences(self) -> int:
        return len(self.features)

    @property
    def num_positions(self) -> int:
        return sum(len(x) for x in self.features)

    @property
    def num_classes(self) -> int:
        return self.vocab.size

    def lengths(self) -> list[int]:
        return [len(x) for x in self.features]

    def window_count(self, order: int) -> int:
        return sum(max(len(x) - order + 1, 0) for x in self.features)

    def stacked(self) -> np.ndarray:
        """All feature vectors concatenated into one (num_positions, d) array."""
        if self._stacked is None:
            self._stacked = np.concatenate(self.features, axis=0)
            self._stacked.setflags(write=False)
        return self._stacked

    def stacked_labels(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("dataset has no labels")
        return np.concatenate(self.labels)

    def window_index(self, order: int) -> np.ndarray:
        """(T_w, order) global position indices of all fully interior windows.

        Row w holds the stacked-feature positions of the w-th window, oldest
        position first.
        """
        if order not in self._windows:
            rows = []
            offset = 0
            for x in self.features:
                n_win = len(x) - order + 1
                if n_win > 0:
                    start = offset + np.arange(n_win, dtype=np.int64)
                    rows.append(start[:, None] + np.arange(order, dtype=np.int64))
                offset += len(x)
            if not rows:
                raise ValueError(f"no windows of order {order}")
            idx = np.concatenate(rows, axis=0)
            idx.setflags(write=False)
            self._windows[order] = idx
        return self._windows[order]

    def without_labels(self) -> "SequenceDataset":
        return SequenceDataset(self.features, self.vocab)


# ---------------------------------------------------------------------------
# generators


@dataclass
class GeneratorConfig:
    """Knobs for the synthetic cipher generator (CLI surface)."""

    seed: int
    num_sequences: int
    length: int
    d: int
    noise_sigma: float
    prototype_scale: float = 0.5
    source: str = "markov"
    transition_seed: int = 0


def gen_markov_labels(
    transition: np.ndarray,
    initial: np.ndarray,
    lengths: Sequence[int],
    seed: int,
) -> list[np.ndarray]:
    """Sample state sequences from a first-order Markov chain.

    ``transition`` is a (C, C) row-stochastic matrix, ``initial`` a length-C
    distribution over start states.  Deterministic for a given seed.
    """
    transition = np.asarray(transition, dtype=np.float64)
    initial = np.asarray(initial, dtype=np.float64)
    C = transition.shape[0]
    if transition.shape != (C, C):
        raise ValueError("transition must be square")
    if np.abs(transition.sum(axis=1) - 1.0).max() > 1e-12:
        raise ValueError("transition rows must sum to 1")
    if abs(initial.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must sum to 1")

    rng = np.random.default_rng(seed)
    lengths = [int(L) for L in lengths]
    if any(L < 1 for L in lengths):
        raise ValueError("sequence lengths must be >= 1")
    M = len(lengths)
    max_len = max(lengths)
    cum = transition.cumsum(axis=1)
    cum_init = initial.cumsum()

    states = np.empty((M, max_len), dtype=np.int64)
    states[:, 0] = np.searchsorted(cum_init, rng.random(M), side="right")
    for t in range(1, max_len):
        u = rng.random(M)
        rows = cum[states[:, t - 1]]
        states[:, t] = (u[:, None] >= rows).sum(axis=1)
    np.clip(states, 0, C - 1, out=states)
    return [states[m, : lengths[m]].copy() for m in range(M)]


def gen_gaussian_features(
    labels: Sequence[np.ndarray],
    means: np.ndarray,
    noise_sigma: float,
    seed: int,
) -> list[np.ndarray]:
    """Per-position features ``means[label] + noise_sigma * N(0, I)``."""
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 2:
        raise ValueError("means must be (C, d)")
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    out = []
    for y in labels:
        y = np.asarray(y, dtype=np.int64)
        x = means[y]
        if noise_sigma > 0.0:
            x = x + noise_sigma * rng.standard_normal((len(y), means.shape[1]))
        out.append(x)
    return out


def cipher_prototypes(
    num_classes: int, d: int, scale: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Class prototypes for the substitution cipher: permuted one-hot vectors.

    Returns (means, permutation) where ``means[c] = scale * e_{perm[c]}``
    padded to dimension ``d``.  The permutation is the cipher key, so the
    prototype index never leaks the class id.
    """
    if d < num_classes:
        raise ValueError(f"d={d} must be >= number of classes {num_classes}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_classes)
    means = np.zeros((num_classes, d))
    means[np.arange(num_classes), perm] = scale
    return means, perm


def gen_cipher_dataset(
    text_ids: Sequence[np.ndarray],
    vocab: Vocabulary,
    d: int,
    noise_sigma: float,
    seed: int,
    prototype_scale: float = 0.5,
) -> SequenceDataset:
    """Encode text as a noisy substitution cipher over prototype vectors.

    The labels are the text ids themselves; features are the permuted class
    prototype plus Gaussian noise.  With ``noise_sigma = 0`` the mapping is a
    deterministic substitution cipher.
    """
    labels = [np.asarray(s, dtype=np.int64) for s in text_ids]
    if not labels or all(len(s) == 0 for s in labels):
        raise ValueError("empty text")
    ss = np.random.SeedSequence(seed).spawn(2)
    means, _ = cipher_prototypes(vocab.size, d, prototype_scale, ss[0])
    features = gen_gaussian_features(labels, means, noise_sigma, ss[1])
    return SequenceDataset(features, vocab, labels)


def split(
    dataset: SequenceDataset, test_fraction: float, seed: int
) -> tuple[SequenceDataset, SequenceDataset]:
    """Split at sequence granularity into (unlabeled train, labeled test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    M = dataset.num_sequences
    if M < 2:
        raise ValueError("need at least 2 sequences to split")
    if dataset.labels is None:
        raise ValueError("cannot build a labeled test set from unlabeled data")
    n_test = min(max(int(round(M * test_fraction)), 1), M - 1)
    order = np.random.default_rng(seed).permutation(M)
    test_idx = sorted(order[:n_test])
    train_idx = sorted(order[n_test:])
    train = SequenceDataset([dataset.features[i] for i in train_idx], dataset.vocab)
    test = SequenceDataset(
        [dataset.features[i] for i in test_idx],
        dataset.vocab,
        [dataset.labels[i] for i in test_idx],
    )
    return train, test


# ---------------------------------------------------------------------------
# dataset file format:
#   header: "seqdata <M> <d> <C> <has_labels>"
#   per sequence: "len <T_n>", then T_n lines of d comma-separated reals,
#   then (if labeled) one line of T_n space-separated ids.


def save_dataset(dataset: SequenceDataset, path) -> None:
    has_labels = int(dataset.labels is not None)
    with open(path, "w", encoding="utf-8") as f:
        f.write(
            f"seqdata {dataset.num_sequences} {dataset.d} "
            f"{dataset.num_classes} {has_labels}\n"
        )
        for n, x in enumerate(dataset.features):
            f.write(f"len {len(x)}\n")
            for row in x:
                f.write(",".join(format(v, ".17g") for v in row) + "\n")
            if has_labels:
                f.write(" ".join(str(int(i)) for i in dataset.labels[n]) + "\n")


def load_dataset(path, vocab: Vocabulary | None = None) -> SequenceDataset:
    """Load a dataset file; symbols are not stored, so a placeholder
    vocabulary of the right size is synthesized unless one is supplied."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    try:
        header = lines[0].split()
        if len(header) != 5 or header[0] != "seqdata":
            raise ValueError("expected 'seqdata <M> <d> <C> <has_labels>'")
        M, d, C, has_labels = (int(v) for v in header[1:])
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: line 1: {e}") from None
    if vocab is None:
        vocab = Vocabulary.placeholder(C)
    elif vocab.size != C:
        raise FormatError(f"{path}: vocabulary size {vocab.size} != header C={C}")

    features, labels = [], []
    lineno = 2
    try:
        for _ in range(M):
            tok = lines[lineno - 1].split()
            if len(tok) != 2 or tok[0] != "len":
                raise ValueError("expected 'len <T_n>'")
            T_n = int(tok[1])
            lineno += 1
            block = lines[lineno - 1 : lineno - 1 + T_n]
            x = np.array(
                [[float(v) for v in row.split(",")] for row in block]
            ).reshape(T_n, d)
            lineno += T_n
            features.append(x)
            if has_labels:
                y = np.array([int(v) for v in lines[lineno - 1].split()], dtype=np.int64)
                if len(y) != T_n:
                    raise ValueError(f"expected {T_n} labels, got {len(y)}")
                lineno += 1
                labels.append(y)
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: line {lineno}: {e}") from None
    return SequenceDataset(features, vocab, labels if has_labels else None)
