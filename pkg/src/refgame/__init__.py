"""refgame: a desk-scale lab for communication-based language learning.

Two tabula-rasa agents play a cooperative referential game: the speaker
describes a referent with one symbol, the listener must pick the referent
out of two objects, and both learn purely from communication success via
policy gradients.  The emerging protocol is then audited for natural-
language-like semantics: referential consistency, alignment of induced
symbols to gold attributes, and similarity structure among gold attributes.
"""

__version__ = "0.1.0"

from .agents import (
    ListenerParams,
    SpeakerParams,
    init_params,
    listener_backward,
    listener_forward,
    load_checkpoint,
    save_checkpoint,
    speaker_backward,
    speaker_forward,
)
from .analysis import (
    align_attributes,
    gold_similarity,
    referential_inconsistency,
    success_curve,
)
from .datasets import (
    DEFAULT_SCHEMA,
    AttributeSchema,
    ObjectSpec,
    Scene,
    SceneSet,
    attributes_of,
    generate_shapes,
    load_feature_file,
    save_feature_file,
    split_train_test,
)
from .game import Episode, Transcript, accumulate_transcript, play_batch, play_episode
from .manifest import RunManifest, run_experiment
from .numerics import make_rng, spawn_rngs
from .training import TrainConfig, TrainResult, evaluate, reinforce_step, train

__all__ = [
    "__version__",
    "AttributeSchema", "DEFAULT_SCHEMA", "ObjectSpec", "Scene", "SceneSet",
    "attributes_of", "generate_shapes", "load_feature_file", "save_feature_file",
    "split_train_test",
    "SpeakerParams", "ListenerParams", "init_params",
    "speaker_forward", "speaker_backward", "listener_forward", "listener_backward",
    "save_checkpoint", "load_checkpoint",
    "Episode", "Transcript", "play_episode", "play_batch", "accumulate_transcript",
    "TrainConfig", "TrainResult", "train", "evaluate", "reinforce_step",
    "referential_inconsistency", "align_attributes", "gold_similarity", "success_curve",
    "RunManifest", "run_experiment",
    "make_rng", "spawn_rngs",
]
