"""Dense linear algebra and stochastic sampling kernel for the game agents.

Everything runs on float64 numpy arrays.  The networks involved are tiny, so
these helpers favour reproducibility and exact analytic derivatives over
throughput.  Random streams are seeded PCG64 generators; the algorithm name
is exported so run metadata can record it and transcripts stay replayable.
"""

from __future__ import annotations

import warnings

import numpy as np

#: Algorithm identifier recorded in provenance metadata.  PCG64 is seedable
#: and produces the same draw sequence on every platform.
RNG_ALGORITHM = "pcg64"

#: Tolerance on sum(p) for categorical sampling.
PROBABILITY_ATOL = 1e-6


class ZeroVectorWarning(UserWarning):
    """Cosine similarity was asked for a zero vector and returned 0."""


def make_rng(seed):
    """Create a seeded random stream (numpy Generator over PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed, n):
    """Derive ``n`` independent child streams from one master seed.

    Children are spawned through numpy's SeedSequence, so the split is
    deterministic and collision-free.
    """
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(ss)) for ss in children]


def matmul(a, b):
    """Matrix product with shape checking and a finite-result guarantee."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore"):
        out = a @ b
    if not np.isfinite(out).all():
        raise ValueError("matmul produced non-finite entries")
    return out


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)); saturates to exactly 0/1 at the extremes."""
    arr = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-arr))
    if arr.ndim == 0:
        return float(out)
    return out


def sigmoid_prime(x):
    """Derivative of the logistic function, s(x) * (1 - s(x))."""
    s = sigmoid(x)
    return s * (1.0 - s)


def softmax(logits):
    """Probability vector from logits, computed with max subtraction.

    Invariant under adding a constant to all logits; entries are positive
    and sum to 1 within 1e-9 even for logits of magnitude 1e3.
    """
    v = np.asarray(logits, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"softmax expects a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    if not np.isfinite(v).all():
        raise ValueError("softmax input contains non-finite entries")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_vjp(probs, upstream):
    """Vector-Jacobian product of softmax at an output ``probs``.

    Returns J^T u where J = diag(p) - p p^T, i.e. p * (u - p.u).
    """
    p = np.asarray(probs, dtype=np.float64)
    u = np.asarray(upstream, dtype=np.float64)
    return p * (u - float(p @ u))


def sample_categorical(p, rng):
    """Draw one index distributed according to ``p``, advancing ``rng`` by one draw."""
    q = np.asarray(p, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError(f"probability vector must be 1-D and non-empty, got shape {q.shape}")
    if (q < 0).any():
        raise ValueError("probability vector has negative entries")
    total = float(q.sum())
    if abs(total - 1.0) > PROBABILITY_ATOL:
        raise ValueError(f"probabilities sum to {total!r}, expected 1 within {PROBABILITY_ATOL}")
    u = rng.random()
    cum = np.cumsum(q)
    i = int(np.searchsorted(cum, u, side="right"))
    if i >= q.size:  # u landed past the last partial sum due to rounding
        i = q.size - 1
    while i > 0 and q[i] == 0.0:
        i -= 1
    return i


def greedy_index(p):
    """Index of the largest probability; ties resolve to the lowest index."""
    return int(np.argmax(np.asarray(p)))


def cosine(u, v):
    """Cosine similarity in [-1, 1]; zero vectors yield 0 with a warning."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"cosine expects equal-length 1-D vectors, got {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine of a zero vector is defined as 0", ZeroVectorWarning, stacklevel=2)
        return 0.0
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))
