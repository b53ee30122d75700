"""
Two symbols cheat, eighteen symbols keep their word
===================================================

With only two symbols the agents still come close to solving the game, but
the only way to do that is a relative code ("say 1 when the referent beats
the context on some learned score"), which is referentially inconsistent:
the same symbol ends up used both for and against the same object.  With a
full vocabulary the protocols stay consistent for almost every symbol.
"""

from refgame import TrainConfig, generate_shapes, referential_inconsistency, split_train_test, train

scene_set = split_train_test(generate_shapes(10_000, seed=7), test_count=1000, seed=7)

for vocab, iterations in ((2, 6000), (18, 15_000)):
    config = TrainConfig(vocab_size=vocab, iterations=iterations, eval_interval=1000, seed=1)
    result = train(scene_set, config)
    ri = referential_inconsistency(result.transcript, vocab_size=vocab)
    print(f"vocabulary {vocab:>2}: success {result.final_heldout_success:.3f}, "
          f"proportion of active symbols with RI > 0: {ri.proportion_inconsistent:.3f} "
          f"({ri.n_inconsistent}/{ri.n_active})")
