"""Numerical core shared by all objectives and trainers.

Every cost in this package is built from one primitive: contract a dense
coefficient table ``R`` of shape ``(C,)*N`` against the per-position class
posteriors of length-N windows,

    s_w = sum_{i_1..i_N} R[i_1,..,i_N] * prod_k Q_k[w, i_k]

together with its gradients with respect to each ``Q_k`` (reverse-mode, with
saved forward intermediates) and the adjoint accumulation
``sum_w weight_w * Q_1[w] x ... x Q_N[w]``.  Callers chunk over windows to
bound the ``B * C**(N-1)`` intermediate memory; all reductions run in a
fixed order so results are reproducible.
"""

from __future__ import annotations

import numpy as np

DEFAULT_CHUNK = 8192

# Probabilities are floored here before any logarithm, preventing -inf while
# leaving every other digit untouched.
PROB_FLOOR = 1e-300


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-logit subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


def posterior_matrix(weights: np.ndarray, gamma: float, X: np.ndarray) -> np.ndarray:
    """Class posteriors softmax(gamma * W x) for every row of X."""
    return stable_softmax(gamma * (X @ weights.T))


def softmax_pullback(P: np.ndarray, dP: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to the logits."""
    inner = (dP * P).sum(axis=-1, keepdims=True)
    return P * (dP - inner)


def contract_windows(
    table: np.ndarray, Q: list[np.ndarray], need_grads: bool = True
) -> tuple[np.ndarray, list[np.ndarray] | None]:
    """Multilinear contraction of ``table`` with per-slot posteriors.

    Parameters
    ----------
    table : dense (C,)*N coefficient tensor
    Q : list of N arrays, each (B, C); ``Q[k][w]`` is the posterior at the
        k-th slot of window w
    need_grads : also return ``grads[k][w, i] = d s_w / d Q[k][w, i]``

    Returns
    -------
    s : (B,) contraction values
    grads : list of N (B, C) arrays, or None
    """
    N = len(Q)
    B, C = Q[0].shape
    if table.shape != (C,) * N:
        raise ValueError(f"table shape {table.shape} != {(C,) * N}")

    # Forward: fold in one slot at a time, keeping the partial contractions.
    t0 = table.reshape(C, -1)
    inters = [t0]
    cur = Q[0] @ t0  # (B, C^(N-1))
    for m in range(1, N):
        inters.append(cur)
        rest = cur.shape[1] // C
        cur = np.einsum("bi,bir->br", Q[m], cur.reshape(B, C, rest))
    s = cur.reshape(B)
    if not need_grads:
        return s, None

    # Reverse: U holds d(s)/d(partial contraction), expanded slot by slot.
    grads: list[np.ndarray | None] = [None] * N
    U = np.ones((B, 1))
    for m in range(N, 0, -1):
        prev = inters[m - 1]
        if m == 1:
            grads[0] = U @ t0.T
        else:
            rest = U.shape[1]
            grads[m - 1] = np.einsum("bir,br->bi", prev.reshape(B, C, rest), U)
            U = (Q[m - 1][:, :, None] * U[:, None, :]).reshape(B, C * rest)
    return s, grads


def accumulate_outer(
    Q: list[np.ndarray], weights: np.ndarray | None = None
) -> np.ndarray:
    """``sum_w weight_w * Q_1[w] x ... x Q_N[w]`` as a dense (C,)*N tensor."""
    N = len(Q)
    B, C = Q[0].shape
    if N == 1:
        flat = Q[0].sum(axis=0) if weights is None else weights @ Q[0]
        return flat
    if N == 2:
        if weights is None:
            return Q[0].T @ Q[1]
        return (Q[0] * weights[:, None]).T @ Q[1]
    cur = Q[0] if weights is None else Q[0] * weights[:, None]
    for m in range(1, N):
        cur = (cur[:, :, None] * Q[m][:, None, :]).reshape(B, -1)
    return cur.sum(axis=0).reshape((C,) * N)


def window_chunks(total: int, chunk: int = DEFAULT_CHUNK):
    for start in range(0, total, chunk):
        yield slice(start, min(start + chunk, total))


def window_cost_and_grad(
    table: np.ndarray,
    X: np.ndarray,
    P: np.ndarray,
    win: np.ndarray,
    gamma: float,
    chunk: int = DEFAULT_CHUNK,
) -> tuple[float, np.ndarray]:
    """Sum of window contractions over all of ``win`` and its W-gradient.

    ``P`` must be the posterior matrix of the classifier whose weights the
    gradient is taken with; slot gradients are scattered back to positions,
    pulled through the softmax once per position, and projected onto X.
    """
    T, C = P.shape
    order = win.shape[1]
    total = 0.0
    dP = np.zeros_like(P)
    for sl in window_chunks(win.shape[0], chunk):
        rows = win[sl]
        Q = [P[rows[:, k]] for k in range(order)]
        s, grads = contract_windows(table, Q)
        total += float(s.sum())
        for k in range(order):
            np.add.at(dP, rows[:, k], grads[k])
    dZ = softmax_pullback(P, dP)
    grad_w = gamma * (dZ.T @ X)
    return total, grad_w


def window_sum(
    table: np.ndarray,
    P: np.ndarray,
    win: np.ndarray,
    chunk: int = DEFAULT_CHUNK,
) -> float:
    """Sum of window contractions only (no gradient)."""
    order = win.shape[1]
    total = 0.0
    for sl in window_chunks(win.shape[0], chunk):
        rows = win[sl]
        Q = [P[rows[:, k]] for k in range(order)]
        s, _ = contract_windows(table, Q, need_grads=False)
        total += float(s.sum())
    return total


def outer_freq(
    P: np.ndarray,
    win: np.ndarray,
    order: int,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Mean outer product of window posteriors: the expected n-gram table."""
    C = P.shape[1]
    out = np.zeros((C,) * order)
    for sl in window_chunks(win.shape[0], chunk):
        rows = win[sl]
        Q = [P[rows[:, k]] for k in range(order)]
        out += accumulate_outer(Q).reshape((C,) * order)
    out /= win.shape[0]
    return out
