"""Character-level n-gram statistics used as the training prior.

An :class:`NGramModel` is a joint probability table over length-``order``
id tuples, estimated from windowed counts with optional add-k smoothing.
Windows are fully interior: a sequence of length ``T`` contributes
``max(T - order + 1, 0)`` windows, and sequences shorter than the order are
skipped.  Models are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError

# Joint tables up to this many cells are stored densely; larger orders fall
# back to a sparse {tuple: prob} map.
DENSE_LIMIT = 1_000_000

_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between symbols and integer ids ``0..size-1``.

    Symbols keep their first-appearance order, so building a vocabulary is
    deterministic for a given corpus.
    """

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in vocabulary")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def id_of(self, symbol: str) -> int:
        return self._index[symbol]

    def symbol_of(self, i: int) -> str:
        return self.symbols[i]

    def encode(self, text: Iterable[str]) -> np.ndarray:
        return np.array([self._index[s] for s in text], dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self.symbols[i] for i in ids)

    @classmethod
    def placeholder(cls, size: int) -> "Vocabulary":
        """Synthetic vocabulary for datasets that store ids only."""
        return cls(tuple(f"<{i}>" for i in range(size)))


def build_vocab(text: Iterable[str]) -> Vocabulary:
    """Collect the distinct symbols of ``text`` in first-appearance order."""
    symbols: list[str] = []
    seen: set[str] = set()
    for s in text:
        if s not in seen:
            seen.add(s)
            symbols.append(s)
    if not symbols:
        raise ValueError("empty corpus")
    return Vocabulary(tuple(symbols))


class NGramModel:
    """Joint probability table over length-``order`` id tuples.

    The table is dense (an ndarray of shape ``(C,)*order``) when it fits in
    ``DENSE_LIMIT`` cells, sparse (a dict) otherwise.  ``support`` is the set
    of tuples with strictly positive probability; tuples outside it have
    probability exactly zero.
    """

    def __init__(self, order: int, vocab: Vocabulary, table):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.vocab = vocab
        C = vocab.size
        if isinstance(table, dict):
            self._dense = None
            self._sparse = {t: float(p) for t, p in table.items() if p != 0.0}
            values = np.array(list(self._sparse.values()))
            total = values.sum() if values.size else 0.0
            if values.size and values.min() < 0.0:
                raise ValueError("negative probability in n-gram table")
        else:
            dense = np.asarray(table, dtype=np.float64)
            if dense.shape != (C,) * order:
                raise ValueError(
                    f"table shape {dense.shape} does not match C={C}, order={order}"
                )
            if dense.min() < 0.0:
                raise ValueError("negative probability in n-gram table")
            self._dense = dense
            self._sparse = None
            total = float(dense.sum())
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"n-gram probabilities sum to {total!r}, expected 1")
        self._support_cache: tuple[np.ndarray, np.ndarray] | None = None
        self._context_marginals: dict[tuple, float] | None = None

    @property
    def num_classes(self) -> int:
        return self.vocab.size

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    def prob(self, tup: Sequence[int]) -> float:
        tup = tuple(int(i) for i in tup)
        if len(tup) != self.order:
            raise ValueError(f"expected a {self.order}-tuple, got {tup}")
        if self._dense is not None:
            return float(self._dense[tup])
        return self._sparse.get(tup, 0.0)

    def dense_table(self) -> np.ndarray:
        """The full joint table; only available at dense-capable sizes."""
        if self._dense is not None:
            return self._dense
        C = self.vocab.size
        if C**self.order > DENSE_LIMIT:
            raise ValueError(
                f"C^order = {C}^{self.order} exceeds dense limit {DENSE_LIMIT}"
            )
        dense = np.zeros((C,) * self.order)
        for t, p in self._sparse.items():
            dense[t] = p
        return dense

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Index array (S, order) and probabilities (S,) of supported tuples.

        Rows are in lexicographic id order so downstream float summations are
        reproducible.
        """
        if self._support_cache is None:
            if self._dense is not None:
                idx = np.argwhere(self._dense > 0.0)
                probs = self._dense[tuple(idx.T)]
            else:
                tuples = sorted(self._sparse)
                idx = np.array(tuples, dtype=np.int64).reshape(len(tuples), self.order)
                probs = np.array([self._sparse[t] for t in tuples])
            self._support_cache = (idx, probs)
        return self._support_cache

    def context_marginal(self, context: Sequence[int]) -> float:
        """Total probability of all tuples beginning with ``context``."""
        context = tuple(int(i) for i in context)
        if len(context) != self.order - 1:
            raise ValueError(f"expected a {self.order - 1}-tuple context")
        if self._dense is not None:
            return float(self._dense[context].sum())
        if self._context_marginals is None:
            marg: dict[tuple, float] = {}
            for t, p in self._sparse.items():
                marg[t[:-1]] = marg.get(t[:-1], 0.0) + p
            self._context_marginals = marg
        return self._context_marginals.get(context, 0.0)

    def conditional(self, context: Sequence[int], next_id: int) -> float:
        """Chain-rule conditional p(next | context) for an (order-1) context."""
        denom = self.context_marginal(context)
        if denom <= 0.0:
            raise ValueError(f"unseen context {tuple(context)}")
        joint = self.prob(tuple(context) + (int(next_id),))
        return joint / denom

    def entropy(self) -> float:
        """Shannon entropy of the joint table, in nats."""
        _, probs = self.support()
        return float(-(probs * np.log(probs)).sum())


def estimate_ngram(
    sequences: Sequence[np.ndarray],
    order: int,
    vocab: Vocabulary,
    smoothing: float = 0.0,
) -> NGramModel:
    """Estimate a joint n-gram table from id sequences with add-k smoothing.

    Each sliding window of ``order`` consecutive ids counts once; sequences
    shorter than ``order`` are skipped.  The estimate is
    ``(count + k) / (W + k * C**order)`` with ``W`` the total window count.

    Parameters
    ----------
    sequences : list of 1-d integer arrays
    order : n-gram order, >= 1
    vocab : supplies the class count C
    smoothing : add-k constant, >= 0.  With ``k = 0`` the support is exactly
        the set of observed windows.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if smoothing < 0.0:
        raise ValueError("smoothing must be >= 0")
    C = vocab.size
    cells = C**order

    if cells > DENSE_LIMIT:
        if smoothing > 0.0:
            raise ValueError("add-k smoothing needs a dense table; C^order too large")
        counts: dict[tuple, int] = {}
        W = 0
        for seq in sequences:
            seq = np.asarray(seq, dtype=np.int64)
            _check_ids(seq, C)
            for t in range(len(seq) - order + 1):
                tup = tuple(seq[t : t + order])
                counts[tup] = counts.get(tup, 0) + 1
                W += 1
        if W == 0:
            raise ValueError("no windows: every sequence is shorter than the order")
        return NGramModel(order, vocab, {t: c / W for t, c in counts.items()})

    flat = np.zeros(cells)
    W = 0
    powers = C ** np.arange(order - 1, -1, -1, dtype=np.int64)
    for seq in sequences:
        seq = np.asarray(seq, dtype=np.int64)
        _check_ids(seq, C)
        n_win = len(seq) - order + 1
        if n_win <= 0:
            continue
        codes = np.zeros(n_win, dtype=np.int64)
        for k in range(order):
            codes += seq[k : k + n_win] * powers[k]
        np.add.at(flat, codes, 1.0)
        W += n_win
    if W == 0:
        raise ValueError("no windows: every sequence is shorter than the order")
    table = (flat + smoothing) / (W + smoothing * cells)
    return NGramModel(order, vocab, table.reshape((C,) * order))


def _check_ids(seq: np.ndarray, C: int) -> None:
    if seq.size and (seq.min() < 0 or seq.max() >= C):
        raise ValueError(f"id out of range [0, {C})")


# ---------------------------------------------------------------------------
# LM file format:
#   line 1: "ngram <order> <C>"
#   line 2: vocabulary symbols, space separated, escaped
#   then one line per supported tuple: ids separated by spaces, a tab, the
#   probability with 17 significant digits.

_ESCAPES = {"\\": "\\\\", " ": "\\s", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "s": " ", "t": "\t", "n": "\n", "r": "\r"}


def _escape_symbol(symbol: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in symbol)


def _unescape_symbol(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _UNESCAPES:
                raise ValueError(f"bad escape in symbol {text!r}")
            out.append(_UNESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def save_ngram(model: NGramModel, path) -> None:
    """Write a model to the text LM format (bit-exact round trip)."""
    idx, probs = model.support()
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"ngram {model.order} {model.vocab.size}\n")
        f.write(" ".join(_escape_symbol(s) for s in model.vocab.symbols) + "\n")
        for row, p in zip(idx, probs):
            f.write(" ".join(str(int(i)) for i in row) + "\t" + format(p, ".17g") + "\n")


def load_ngram(path) -> NGramModel:
    """Parse an LM file, validating ids, probabilities, and normalization."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    try:
        header = lines[0].split()
        if len(header) != 3 or header[0] != "ngram":
            raise ValueError("expected 'ngram <order> <C>'")
        order, C = int(header[1]), int(header[2])
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: line 1: {e}") from None
    try:
        symbols = tuple(_unescape_symbol(tok) for tok in lines[1].split(" "))
        vocab = Vocabulary(symbols)
        if vocab.size != C:
            raise ValueError(f"{len(symbols)} symbols, header says {C}")
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: line 2: {e}") from None

    entries: dict[tuple, float] = {}
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        try:
            ids_part, _, prob_part = line.partition("\t")
            if not prob_part:
                raise ValueError("missing tab separator")
            tup = tuple(int(tok) for tok in ids_part.split())
            if len(tup) != order:
                raise ValueError(f"expected {order} ids, got {len(tup)}")
            if any(i < 0 or i >= C for i in tup):
                raise ValueError(f"id out of range [0, {C})")
            if tup in entries:
                raise ValueError(f"duplicate tuple {tup}")
            p = float(prob_part)
            if not 0.0 < p <= 1.0:
                raise ValueError(f"probability {p} outside (0, 1]")
            entries[tup] = p
        except ValueError as e:
            raise FormatError(f"{path}: line {lineno}: {e}") from None

    total = sum(entries.values())
    if abs(total - 1.0) > _PROB_SUM_TOL:
        raise FormatError(f"{path}: probabilities sum to {total!r}, expected 1")
    if C**order > DENSE_LIMIT:
        return NGramModel(order, vocab, entries)
    table = np.zeros((C,) * order)
    for tup, p in entries.items():
        table[tup] = p
    return NGramModel(order, vocab, table)
