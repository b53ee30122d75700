"""
Learning a protocol from reward alone
=====================================

Both agents start blank and improve only through the shared game point,
via batched score-function gradients with a running-mean reward baseline.
Communication stays at chance for a while (neither agent can learn much
before the other becomes minimally predictable), then takes off.
"""

from refgame import TrainConfig, generate_shapes, split_train_test, train
from refgame.analysis import success_curve
from refgame.training import write_stats

scene_set = split_train_test(generate_shapes(10_000, seed=7), test_count=1000, seed=7)

config = TrainConfig(iterations=5000, eval_interval=250, seed=1)
print(f"vocab {config.vocab_size}, dim {config.dim}, batch {config.batch_size}, "
      f"lr {config.learning_rate}, baseline {config.baseline}")

result = train(scene_set, config, progress=lambda p: print(
    f"  iteration {p.iteration:>5}: held-out success {p.heldout_success:.3f}"
))

print(f"\nfinal held-out success: {result.final_heldout_success:.3f}")

# The stats table is a plain CSV, one eval point per row, ready to plot.
write_stats("/tmp/demo_stats.csv", result.stats)
curve = success_curve(result.stats, smooth_window=3)
print("smoothed tail of the curve:", [(it, round(v, 3)) for it, v in curve[-4:]])
