"""
One referential-game episode, step by step
==========================================

The speaker sees (referent, context) and utters one attribute index.  The
listener sees the same two objects in a shuffled order plus the message and
points at one of them; both agents score iff it points at the referent.
"""

import numpy as np

from refgame import generate_shapes, init_params, make_rng, play_episode
from refgame.training import evaluate

scene_set = generate_shapes(2000, seed=0)
rng = make_rng(1)

# Tabula-rasa agents: small random weights, no knowledge of anything.
speaker, listener = init_params(dim=64, vocab=18, hidden=20, scheme="uniform", rng=rng)

episode = play_episode(scene_set.scenes[0], speaker, listener, rng)
print("scene", episode.scene_id)
print("  referent sat in listener slot", episode.referent_slot)
print("  speaker said attribute", episode.attribute,
      f"(log-prob {episode.speaker_logp:.3f})")
print("  listener chose slot", episode.choice,
      f"(log-prob {episode.listener_logp:.3f})")
print("  reward:", episode.reward)

# Untrained agents can only guess: over many scenes they sit at one half.
rate = evaluate(speaker, listener, list(scene_set.scenes), mode="sampled", rng=rng)
print(f"\nuntrained success over {len(scene_set)} scenes: {rate:.3f} (chance is 0.5)")

# An agent pair wired by hand solves noiseless scenes outright: the speaker
# detects each attribute with a scaled identity map and scores (present,
# absent) pairs high; the listener ranks objects by the spoken coordinate.
from refgame.agents import ListenerParams, SpeakerParams

gain = 40.0
attr = np.zeros((64, 18))
attr[:18, :18] = gain * np.eye(18)
pair_hidden = np.zeros((2, 20)); pair_hidden[0, 0] = gain; pair_hidden[1, 0] = -gain
pair_readout = np.zeros((20, 1)); pair_readout[0, 0] = gain
oracle_speaker = SpeakerParams(attr.copy(), pair_hidden, pair_readout)
oracle_listener = ListenerParams(attr.copy())

noiseless = generate_shapes(2000, seed=0, noise_sigma=0.0)
rate = evaluate(oracle_speaker, oracle_listener, list(noiseless.scenes), mode="greedy")
print(f"hand-built oracle pair on noiseless scenes: {rate:.3f}")
