"""One game episode, batches, and transcript bookkeeping.

The speaker sees (referent, context) in role order.  The listener sees the
same two objects in a randomized presentation order with no hint of which is
the referent, plus the spoken attribute, and earns both agents a point by
picking the referent's slot.

A transcript collects episodes and, per object id, the attribute activation
sets needed by the protocol audits: which attributes were spoken while that
object sat in the referent slot, and which while it sat in the context slot.
"""

from __future__ import annotations

from dataclasses import dataclass


from .agents import listener_forward, speaker_forward
from .datasets import SceneSet


@dataclass
class Episode:
    """One full game round.  Traces are kept for learning, never serialized."""

    scene_id: int
    referent_slot: int  # listener slot that held the referent
    attribute: int
    choice: int
    reward: int
    speaker_logp: float
    listener_logp: float
    speaker_trace: object | None = None
    listener_trace: object | None = None


@dataclass
class Transcript:
    episodes: list
    referent_uses: dict  # object id -> set of attributes spoken while it was the referent
    context_uses: dict  # object id -> set of attributes spoken while it was the context

    def object_ids(self):
        return set(self.referent_uses) | set(self.context_uses)

    def referent_set(self, object_id):
        return self.referent_uses.get(object_id, set())

    def context_set(self, object_id):
        return self.context_uses.get(object_id, set())


def play_episode(scene, speaker, listener, rng=None, *, temperature=1.0, greedy=False,
                 randomize_order=True, keep_traces=True):
    """Play one round on ``scene``.

    Draw order (all from ``rng``): presentation slot, speaker's attribute,
    listener's choice.  Greedy mode takes argmax actions instead of sampling;
    its outcome does not depend on the presentation order, so greedy play
    without an rng is fully deterministic.
    """
    ref_feat = scene.referent.feature
    ctx_feat = scene.context.feature
    if randomize_order and rng is not None:
        referent_slot = int(rng.integers(0, 2))
    else:
        referent_slot = 0
    strace = speaker_forward(speaker, ref_feat, ctx_feat, rng, temperature=temperature, greedy=greedy)
    slots = (ref_feat, ctx_feat) if referent_slot == 0 else (ctx_feat, ref_feat)
    ltrace = listener_forward(
        listener, slots[0], slots[1], strace.attribute, rng, temperature=temperature, greedy=greedy
    )
    reward = 1 if ltrace.choice == referent_slot else 0
    return Episode(
        scene_id=scene.scene_id,
        referent_slot=referent_slot,
        attribute=strace.attribute,
        choice=ltrace.choice,
        reward=reward,
        speaker_logp=strace.logp,
        listener_logp=ltrace.logp,
        speaker_trace=strace if keep_traces else None,
        listener_trace=ltrace if keep_traces else None,
    )


def play_batch(scenes, speaker, listener, rng, batch_size, *, temperature=1.0):
    """Play ``batch_size`` episodes on scenes drawn uniformly with replacement."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if not scenes:
        raise ValueError("cannot sample episodes from an empty scene list")
    episodes = []
    for _ in range(batch_size):
        scene = scenes[int(rng.integers(0, len(scenes)))]
        episodes.append(play_episode(scene, speaker, listener, rng, temperature=temperature))
    return episodes


def accumulate_transcript(episodes, scene_set):
    """Build a Transcript, aggregating activation sets per object id.

    ``scene_set`` may be a SceneSet or a prebuilt ``{scene_id: Scene}`` map.
    An object that appears in many scenes aggregates across all of them.
    """
    index = scene_set.scene_index() if isinstance(scene_set, SceneSet) else scene_set
    referent_uses = {}
    context_uses = {}
    for ep in episodes:
        scene = index.get(ep.scene_id)
        if scene is None:
            raise ValueError(f"episode references unknown scene id {ep.scene_id}")
        referent_uses.setdefault(scene.referent_id, set()).add(ep.attribute)
        context_uses.setdefault(scene.context_id, set()).add(ep.attribute)
    return Transcript(episodes=list(episodes), referent_uses=referent_uses, context_uses=context_uses)


# ---------------------------------------------------------------------------
# Transcript log: one episode per line, tab-separated, append-friendly.
# Log-probabilities are written with repr() so float64 values round-trip
# exactly.
# ---------------------------------------------------------------------------

_TRANSCRIPT_HEADER = "# refgame-transcript v1"
_TRANSCRIPT_COLUMNS = "# columns: scene_id referent_slot attribute choice reward speaker_logp listener_logp"


def write_transcript(path, episodes, append=False):
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as out:
        if not append:
            out.write(_TRANSCRIPT_HEADER + "\n")
            out.write(_TRANSCRIPT_COLUMNS + "\n")
        for ep in episodes:
            out.write(
                f"{ep.scene_id}\t{ep.referent_slot}\t{ep.attribute}\t{ep.choice}\t{ep.reward}"
                f"\t{ep.speaker_logp!r}\t{ep.listener_logp!r}\n"
            )


def read_transcript(path):
    episodes = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise ValueError(f"expected 7 fields in transcript line {lineno}, got {len(fields)}")
            episodes.append(
                Episode(
                    scene_id=int(fields[0]),
                    referent_slot=int(fields[1]),
                    attribute=int(fields[2]),
                    choice=int(fields[3]),
                    reward=int(fields[4]),
                    speaker_logp=float(fields[5]),
                    listener_logp=float(fields[6]),
                )
            )
    return episodes
