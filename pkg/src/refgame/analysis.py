"""Protocol-semantics audits over game transcripts.

Three probes of what the induced symbols mean:

* Referential inconsistency: per attribute, the number of objects for which
  it was spoken both while the object was the referent and while it was the
  context, normalized by the number of objects involved in either role.  A
  consistent, property-like symbol never hits both roles of one object, so
  its score is 0.  Symbols exploited for relative comparisons score above 0.
* Attribute alignment: an injective map from induced symbols to gold
  attributes by descending co-occurrence count (greedy), exposing which
  symbols latched onto which annotated property and which stayed unused.
* Gold similarity: each gold attribute becomes a usage vector over induced
  symbols; the pairwise cosine matrix shows whether related gold attributes
  share induced vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import cosine


@dataclass
class AttributeRi:
    attribute: int
    usage: int  # episodes in which the attribute was spoken
    overlap_images: int  # objects where it was spoken in both roles
    active_images: int  # objects where it was spoken in either role

    @property
    def active(self):
        return self.usage > 0

    @property
    def ri(self):
        if self.active_images == 0:
            return None
        return self.overlap_images / self.active_images


@dataclass
class RiReport:
    rows: list
    n_active: int
    n_inconsistent: int  # active attributes with RI > 0

    @property
    def proportion_inconsistent(self):
        if self.n_active == 0:
            return 0.0
        return self.n_inconsistent / self.n_active


@dataclass
class AlignmentMap:
    mapping: dict  # induced attribute -> gold attribute
    counts: np.ndarray  # (vocab, n_gold) co-occurrence counts
    unaligned: list  # used induced attributes left without a gold partner
    unused: list  # induced attributes never spoken
    tie_break: str = "highest count first, then lowest induced index, then lowest gold index"


@dataclass
class SimilarityReport:
    usage: np.ndarray  # (n_gold, vocab) counts, rows follow ``order``
    cosine: np.ndarray  # (n_gold, n_gold) symmetric
    order: list  # gold attribute index per row/column
    zero_rows: list  # gold attributes never annotated on a played scene


def _episode_attributes(transcript):
    return [ep.attribute for ep in transcript.episodes]


def _infer_vocab(transcript, vocab_size):
    if vocab_size is not None:
        return vocab_size
    attrs = _episode_attributes(transcript)
    return max(attrs) + 1 if attrs else 0


def referential_inconsistency(transcript, vocab_size=None):
    """Per-attribute RI plus the proportion of active attributes with RI > 0.

    For attribute a and per-object activation sets R(i)/C(i), RI(a) is
    (# objects i with a in both R(i) and C(i)) / (# objects with a in
    either).  Attributes never spoken are inactive and excluded from the
    proportion's denominator.
    """
    if not transcript.episodes:
        raise ValueError("cannot audit an empty transcript")
    vocab = _infer_vocab(transcript, vocab_size)
    usage = [0] * vocab
    for a in _episode_attributes(transcript):
        usage[a] += 1

    rows = []
    n_active = 0
    n_inconsistent = 0
    ids = transcript.object_ids()
    for a in range(vocab):
        overlap = 0
        active = 0
        for i in ids:
            in_ref = a in transcript.referent_set(i)
            in_ctx = a in transcript.context_set(i)
            if in_ref and in_ctx:
                overlap += 1
            if in_ref or in_ctx:
                active += 1
        row = AttributeRi(attribute=a, usage=usage[a], overlap_images=overlap, active_images=active)
        rows.append(row)
        if row.active:
            n_active += 1
            if overlap > 0:
                n_inconsistent += 1
    return RiReport(rows=rows, n_active=n_active, n_inconsistent=n_inconsistent)


def _cooccurrence_counts(transcript, scene_set, vocab, n_gold):
    index = scene_set.scene_index()
    counts = np.zeros((vocab, n_gold), dtype=np.int64)
    for ep in transcript.episodes:
        scene = index.get(ep.scene_id)
        if scene is None:
            raise ValueError(f"episode references unknown scene id {ep.scene_id}")
        for g in scene.gold_attributes:
            counts[ep.attribute, g] += 1
    return counts


def align_attributes(transcript, scene_set, vocab_size=None):
    """Greedy injective map from induced attributes to gold attributes.

    Pairs are visited in decreasing co-occurrence count (ties: lowest induced
    index, then lowest gold index) and assigned while both sides are free.
    Induced attributes that were spoken but won no partner are reported as
    unaligned; a scene annotated with several gold attributes contributes one
    count to each.
    """
    vocab = _infer_vocab(transcript, vocab_size)
    n_gold = scene_set.n_attributes
    counts = _cooccurrence_counts(transcript, scene_set, vocab, n_gold)
    used = set(_episode_attributes(transcript))

    pairs = [
        (int(counts[a, g]), a, g)
        for a in range(vocab)
        for g in range(n_gold)
        if counts[a, g] > 0
    ]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))

    mapping = {}
    taken_gold = set()
    for count, a, g in pairs:
        if a in mapping or g in taken_gold:
            continue
        mapping[a] = g
        taken_gold.add(g)

    unaligned = sorted(a for a in used if a not in mapping)
    unused = sorted(a for a in range(vocab) if a not in used)
    return AlignmentMap(mapping=mapping, counts=counts, unaligned=unaligned, unused=unused)


def gold_similarity(transcript, scene_set, vocab_size=None, ordering=None, categories=None):
    """Usage vectors per gold attribute and their pairwise cosine matrix.

    ``ordering`` fixes the row order explicitly; ``categories`` (gold index
    -> category name) instead sorts rows so same-category attributes sit
    together.  Gold attributes never annotated on a played scene have all-zero
    usage rows; their similarities are defined as 0 and flagged.
    """
    if ordering is not None and categories is not None:
        raise ValueError("pass either ordering or categories, not both")
    vocab = _infer_vocab(transcript, vocab_size)
    n_gold = scene_set.n_attributes
    counts = _cooccurrence_counts(transcript, scene_set, vocab, n_gold)
    usage = counts.T.astype(np.float64)  # (n_gold, vocab)

    if ordering is not None:
        order = list(ordering)
        if sorted(order) != list(range(n_gold)):
            raise ValueError("ordering must be a permutation of all gold attribute indices")
    elif categories is not None:
        order = sorted(range(n_gold), key=lambda g: (categories.get(g, ""), g))
    else:
        order = list(range(n_gold))

    usage = usage[order]
    norms = np.linalg.norm(usage, axis=1)
    zero_rows = [order[k] for k in range(n_gold) if norms[k] == 0.0]

    sim = np.zeros((n_gold, n_gold), dtype=np.float64)
    for i in range(n_gold):
        if norms[i] == 0.0:
            continue
        for j in range(i, n_gold):
            if norms[j] == 0.0:
                continue
            sim[i, j] = sim[j, i] = cosine(usage[i], usage[j])
    return SimilarityReport(usage=usage, cosine=sim, order=order, zero_rows=zero_rows)


def success_curve(stats, series="heldout", smooth_window=None):
    """(iteration, success) pairs from training stats, ready for plotting.

    ``series`` picks the held-out or train curve.  With ``smooth_window`` w,
    each value becomes the mean of the last w points up to and including it.
    """
    if not stats.points:
        raise ValueError("stats contain no eval points")
    if series == "heldout":
        values = [p.heldout_success for p in stats.points]
    elif series == "train":
        values = [p.train_success for p in stats.points]
    else:
        raise ValueError(f"unknown series {series!r}")
    iterations = [p.iteration for p in stats.points]
    if smooth_window is not None:
        if smooth_window < 1:
            raise ValueError("smooth_window must be >= 1")
        smoothed = []
        for k in range(len(values)):
            lo = max(0, k - smooth_window + 1)
            smoothed.append(float(np.mean(values[lo : k + 1])))
        values = smoothed
    return list(zip(iterations, values))


# ---------------------------------------------------------------------------
# Tabular writers: comma-separated tables plus a short human-readable summary.
# ---------------------------------------------------------------------------


def write_ri_report(path, report):
    with open(path, "w", encoding="utf-8") as out:
        out.write("attribute,usage,overlap_images,active_images,ri\n")
        for row in report.rows:
            ri = "" if row.ri is None else repr(row.ri)
            out.write(f"{row.attribute},{row.usage},{row.overlap_images},{row.active_images},{ri}\n")


def write_alignment(path, amap, attribute_names=None):
    def gold_name(g):
        return attribute_names[g] if attribute_names else str(g)

    with open(path, "w", encoding="utf-8") as out:
        out.write("induced,gold,gold_name,count\n")
        for a in sorted(amap.mapping):
            g = amap.mapping[a]
            out.write(f"{a},{g},{gold_name(g)},{amap.counts[a, g]}\n")
        for a in amap.unaligned:
            out.write(f"{a},,,{amap.counts[a].sum()}\n")


def write_similarity(path, report, attribute_names=None):
    def gold_name(g):
        return attribute_names[g] if attribute_names else str(g)

    with open(path, "w", encoding="utf-8") as out:
        out.write("gold," + ",".join(gold_name(g) for g in report.order) + "\n")
        for k, g in enumerate(report.order):
            out.write(gold_name(g) + "," + ",".join(repr(x) for x in report.cosine[k]) + "\n")


def write_curve(path, curve):
    with open(path, "w", encoding="utf-8") as out:
        out.write("iteration,success\n")
        for it, v in curve:
            out.write(f"{it},{v!r}\n")


def summarize(report=None, amap=None, sim=None, attribute_names=None):
    """Human-readable digest of whichever audits were run."""
    lines = []
    if report is not None:
        lines.append(
            f"referential inconsistency: {report.n_inconsistent} of {report.n_active} active "
            f"attributes have RI > 0 (proportion {report.proportion_inconsistent:.3f})"
        )
    if amap is not None:
        named = {}
        for a, g in sorted(amap.mapping.items()):
            name = attribute_names[g] if attribute_names else str(g)
            named[a] = name
        lines.append(f"alignment: {len(amap.mapping)} induced attributes mapped ({named}),")
        lines.append(f"  unaligned: {amap.unaligned or 'none'}; never used: {amap.unused or 'none'}")
        lines.append(f"  tie break: {amap.tie_break}")
    if sim is not None:
        lines.append(
            f"gold similarity: {len(sim.order)} x {len(sim.order)} cosine matrix, "
            f"{len(sim.zero_rows)} all-zero usage rows"
        )
    return "\n".join(lines) + "\n"
