"""The two game-playing networks and their exact score-function gradients.

Speaker: both objects' features are mapped into attribute space through a
shared D x V matrix and squashed with a sigmoid, giving each attribute an
activeness in (0, 1) per object.  For every attribute the (referent,
context) activeness pair runs through a tiny shared scorer (2 -> h linear,
sigmoid, h -> 1 linear) yielding how discriminative that attribute is; the
softmax of those scores is the distribution the spoken attribute is sampled
from.  The squashing matters: with raw linear activations the agents
reliably drift into relational codes (compare magnitudes across objects)
that win the game but are referentially inconsistent, whereas bounded
activeness pushes symbols toward consistent set-like use.

Listener: both objects are embedded through its own (deliberately untied)
D x V matrix.  With a one-hot message the dot product against each embedding
reduces to that embedding's coordinate at the spoken attribute; the softmax
of the two coordinates is the distribution the chosen object is sampled
from.  Listener scores stay unsquashed so its choice confidence is not
capped.

Backward passes are derived by hand and return the gradient of
``advantage * log p(action)`` with respect to every weight matrix.  Neither
network has biases.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .numerics import greedy_index, sample_categorical, sigmoid, softmax

INIT_SCHEMES = ("uniform", "gaussian", "zeros")


class CheckpointError(ValueError):
    """A checkpoint file violated the documented format."""


@dataclass
class SpeakerParams:
    attr_proj: np.ndarray  # (D, V) feature -> attribute activations, shared across objects
    pair_hidden: np.ndarray  # (2, h) mixes one (referent, context) activation pair
    pair_readout: np.ndarray  # (h, 1) discriminativeness score

    @property
    def dim(self):
        return self.attr_proj.shape[0]

    @property
    def vocab(self):
        return self.attr_proj.shape[1]

    @property
    def hidden(self):
        return self.pair_hidden.shape[1]

    def copy(self):
        return SpeakerParams(self.attr_proj.copy(), self.pair_hidden.copy(), self.pair_readout.copy())


@dataclass
class ListenerParams:
    attr_proj: np.ndarray  # (D, V), independent of the speaker's map

    @property
    def dim(self):
        return self.attr_proj.shape[0]

    @property
    def vocab(self):
        return self.attr_proj.shape[1]

    def copy(self):
        return ListenerParams(self.attr_proj.copy())


@dataclass
class SpeakerTrace:
    probs: np.ndarray  # (V,) attribute distribution
    attribute: int
    logp: float
    cache: dict  # forward intermediates consumed by speaker_backward


@dataclass
class ListenerTrace:
    probs: np.ndarray  # (2,) choice distribution
    choice: int
    logp: float
    cache: dict


@dataclass
class SpeakerGrads:
    attr_proj: np.ndarray
    pair_hidden: np.ndarray
    pair_readout: np.ndarray


@dataclass
class ListenerGrads:
    attr_proj: np.ndarray


def init_params(dim, vocab, hidden, scheme="uniform", rng=None, scale=None):
    """Fresh (speaker, listener) parameters.

    Schemes: ``uniform`` U(-scale, scale) with scale 0.08 by default,
    ``gaussian`` N(0, scale^2) with scale 0.01, and ``zeros`` (handy in
    tests: a zero speaker scores every attribute equally).  Matrices are
    drawn in a fixed order so a seeded rng reproduces them exactly.
    """
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}, expected one of {INIT_SCHEMES}")
    if min(dim, vocab, hidden) <= 0:
        raise ValueError("dim, vocab and hidden must be positive")
    shapes = [(dim, vocab), (2, hidden), (hidden, 1), (dim, vocab)]
    if scheme == "zeros":
        mats = [np.zeros(s) for s in shapes]
    elif scheme == "uniform":
        s = 0.08 if scale is None else scale
        mats = [rng.uniform(-s, s, size=shape) for shape in shapes]
    else:
        s = 0.01 if scale is None else scale
        mats = [rng.normal(0.0, s, size=shape) for shape in shapes]
    speaker = SpeakerParams(mats[0], mats[1], mats[2])
    listener = ListenerParams(mats[3])
    return speaker, listener


def _as_feature(feat, dim, who):
    arr = np.asarray(feat, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ValueError(f"{who} expected a feature of dimension {dim}, got shape {arr.shape}")
    return arr


def speaker_distribution(params, referent_feat, context_feat, temperature=1.0):
    """Attribute distribution for a scene, plus cached intermediates."""
    r = _as_feature(referent_feat, params.dim, "speaker")
    c = _as_feature(context_feat, params.dim, "speaker")
    active_r = sigmoid(r @ params.attr_proj)  # (V,) attribute activeness per object
    active_c = sigmoid(c @ params.attr_proj)
    pairs = np.stack((active_r, active_c), axis=1)  # (V, 2)
    hidden = sigmoid(pairs @ params.pair_hidden)  # (V, h)
    scores = hidden @ params.pair_readout[:, 0]  # (V,)
    probs = softmax(scores / temperature)
    cache = {
        "referent_feat": r,
        "context_feat": c,
        "pairs": pairs,
        "hidden": hidden,
        "probs": probs,
        "temperature": temperature,
        "shape": (params.dim, params.vocab, params.hidden),
    }
    return probs, cache


def speaker_forward(params, referent_feat, context_feat, rng=None, *, temperature=1.0, greedy=False):
    """Run the speaker on a scene and pick an attribute."""
    probs, cache = speaker_distribution(params, referent_feat, context_feat, temperature)
    a = greedy_index(probs) if greedy else sample_categorical(probs, rng)
    return SpeakerTrace(probs=probs, attribute=a, logp=float(np.log(probs[a])), cache=cache)


def speaker_backward(params, trace, advantage):
    """Gradient of ``advantage * log p(spoken attribute)`` w.r.t. the speaker weights."""
    cache = trace.cache
    assert cache["shape"] == (params.dim, params.vocab, params.hidden), "trace/params mismatch"
    if advantage == 0.0:
        return SpeakerGrads(
            np.zeros_like(params.attr_proj),
            np.zeros_like(params.pair_hidden),
            np.zeros_like(params.pair_readout),
        )
    probs = cache["probs"]
    hidden = cache["hidden"]
    pairs = cache["pairs"]

    g_scores = -probs.copy()
    g_scores[trace.attribute] += 1.0
    g_scores *= advantage / cache["temperature"]  # (V,) d logp / d scores

    g_readout = (hidden.T @ g_scores)[:, None]  # (h, 1)
    g_hidden = np.outer(g_scores, params.pair_readout[:, 0])  # (V, h)
    g_pre = g_hidden * hidden * (1.0 - hidden)  # sigmoid'(z) = s (1 - s)
    g_pair_hidden = pairs.T @ g_pre  # (2, h)
    g_pairs = g_pre @ params.pair_hidden.T  # (V, 2)
    g_active_r = g_pairs[:, 0] * pairs[:, 0] * (1.0 - pairs[:, 0])  # through the activeness sigmoid
    g_active_c = g_pairs[:, 1] * pairs[:, 1] * (1.0 - pairs[:, 1])
    g_attr = np.outer(cache["referent_feat"], g_active_r) + np.outer(
        cache["context_feat"], g_active_c
    )  # (D, V)
    return SpeakerGrads(g_attr, g_pair_hidden, g_readout)


def listener_distribution(params, first_feat, second_feat, attribute, temperature=1.0):
    """Choice distribution over the two presented objects, plus cache.

    The one-hot message selects a single column of the embedding matrix,
    so each object's score is just its feature dotted with that column.
    """
    if not 0 <= attribute < params.vocab:
        raise ValueError(f"attribute {attribute} out of range [0, {params.vocab})")
    f1 = _as_feature(first_feat, params.dim, "listener")
    f2 = _as_feature(second_feat, params.dim, "listener")
    column = params.attr_proj[:, attribute]
    scores = np.array([f1 @ column, f2 @ column])
    probs = softmax(scores / temperature)
    cache = {
        "first_feat": f1,
        "second_feat": f2,
        "attribute": attribute,
        "probs": probs,
        "temperature": temperature,
        "shape": (params.dim, params.vocab),
    }
    return probs, cache


def listener_forward(params, first_feat, second_feat, attribute, rng=None, *, temperature=1.0, greedy=False):
    """Run the listener on a presented pair and pick an object slot."""
    probs, cache = listener_distribution(params, first_feat, second_feat, attribute, temperature)
    choice = greedy_index(probs) if greedy else sample_categorical(probs, rng)
    return ListenerTrace(probs=probs, choice=choice, logp=float(np.log(probs[choice])), cache=cache)


def listener_backward(params, trace, advantage):
    """Gradient of ``advantage * log p(chosen object)`` w.r.t. the listener weights.

    Only the spoken attribute's column receives gradient; every other
    column is exactly zero.
    """
    cache = trace.cache
    assert cache["shape"] == (params.dim, params.vocab), "trace/params mismatch"
    grad = np.zeros_like(params.attr_proj)
    if advantage == 0.0:
        return ListenerGrads(grad)
    g = -cache["probs"].copy()
    g[trace.choice] += 1.0
    g *= advantage / cache["temperature"]
    grad[:, cache["attribute"]] = g[0] * cache["first_feat"] + g[1] * cache["second_feat"]
    return ListenerGrads(grad)


# ---------------------------------------------------------------------------
# Checkpoints: magic, version, dims, a JSON metadata blob, then the four
# weight matrices as raw little-endian float64 bytes.  Round trips are
# bit-exact.
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"RFGCKPT1"
_CKPT_VERSION = 1


def save_checkpoint(path, speaker, listener, metadata=None):
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as out:
        out.write(_CKPT_MAGIC)
        out.write(struct.pack("<IIII", _CKPT_VERSION, speaker.dim, speaker.vocab, speaker.hidden))
        out.write(struct.pack("<I", len(meta)))
        out.write(meta)
        for mat in (speaker.attr_proj, speaker.pair_hidden, speaker.pair_readout, listener.attr_proj):
            out.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Load (speaker, listener, metadata) saved by save_checkpoint."""
    with open(path, "rb") as f:
        magic = f.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        header = f.read(20)
        if len(header) != 20:
            raise CheckpointError("truncated checkpoint header")
        version, dim, vocab, hidden, meta_len = struct.unpack("<IIIII", header)
        if version != _CKPT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        metadata = json.loads(f.read(meta_len).decode("utf-8"))

        def read_mat(shape, name):
            n = int(np.prod(shape))
            data = f.read(8 * n)
            if len(data) != 8 * n:
                raise CheckpointError(f"truncated checkpoint while reading {name}")
            return np.frombuffer(data, dtype="<f8").reshape(shape).copy()

        speaker = SpeakerParams(
            read_mat((dim, vocab), "speaker attribute map"),
            read_mat((2, hidden), "pair mixer"),
            read_mat((hidden, 1), "pair readout"),
        )
        listener = ListenerParams(read_mat((dim, vocab), "listener attribute map"))
        if f.read(1):
            raise CheckpointError("trailing data after checkpoint matrices")
    return speaker, listener, metadata
