"""
Auditing what the symbols came to mean
======================================

Game success alone says nothing about whether the emergent symbols behave
like word meanings.  Three audits probe the protocol over the held-out
transcript: referential inconsistency (is a symbol ever used both for and
against the same object?), an injective alignment of induced symbols to
gold attributes by co-occurrence, and cosine similarities of gold
attributes in induced-symbol usage space.
"""

from refgame import (
    TrainConfig,
    align_attributes,
    generate_shapes,
    gold_similarity,
    referential_inconsistency,
    split_train_test,
    train,
)

scene_set = split_train_test(generate_shapes(10_000, seed=7), test_count=1000, seed=7)
config = TrainConfig(iterations=8000, eval_interval=2000, seed=3)
result = train(scene_set, config)
print(f"held-out success: {result.final_heldout_success:.3f}")

# Referential inconsistency: for attribute a, the share of objects that had
# a spoken both while they were the referent and while they were the context.
ri = referential_inconsistency(result.transcript, vocab_size=config.vocab_size)
print(f"\nactive attributes: {ri.n_active}/{config.vocab_size}; "
      f"proportion with RI > 0: {ri.proportion_inconsistent:.3f}")
for row in ri.rows:
    if row.active and row.ri is not None and row.ri > 0:
        print(f"  attribute {row.attribute}: RI = {row.overlap_images}/{row.active_images}")

# Alignment: which gold attribute does each induced symbol co-occur with most?
names = scene_set.schema.attribute_names
amap = align_attributes(result.transcript, scene_set, vocab_size=config.vocab_size)
print("\ninduced -> gold alignment (greedy by count):")
for a in sorted(amap.mapping):
    g = amap.mapping[a]
    print(f"  symbol {a:>2} -> {names[g]:<12} ({amap.counts[a, g]} co-occurrences)")
print("unaligned:", amap.unaligned, " never used:", amap.unused)

# Similarity structure: gold attributes as usage vectors over induced symbols.
sim = gold_similarity(result.transcript, scene_set, vocab_size=config.vocab_size)
pairs = []
for i in range(len(names)):
    for j in range(i + 1, len(names)):
        pairs.append((sim.cosine[i, j], names[i], names[j]))
pairs.sort(reverse=True)
print("\nmost similar gold-attribute pairs in induced-symbol space:")
for value, a, b in pairs[:5]:
    print(f"  {a} ~ {b}: {value:.3f}")
