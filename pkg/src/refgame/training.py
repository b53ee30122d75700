"""Joint policy-gradient optimization of both agents from game reward alone.

Each batch: play episodes with sampled actions, form the shared advantage
(reward minus the optional running-mean baseline), and move every weight
along ``learning_rate * advantage * grad log p(own action)`` averaged over
the batch.  Gradients are averaged rather than summed so the learning rate
does not depend on the batch size.  The baseline is updated after the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .agents import init_params, listener_backward, speaker_backward
from .datasets import FEATURE_MODES
from .game import accumulate_transcript, play_batch, play_episode
from .numerics import spawn_rngs

BASELINE_MODES = ("none", "running-mean")
ACTION_MODES = ("sampled", "greedy")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Everything an experiment needs: dataset, agents, optimization, audits.

    Serializes to a ``key = value`` text file (# comments allowed); unknown
    keys are rejected so typos fail loudly.
    """

    # dataset
    n_scenes: int = 10000
    test_count: int = 1000
    feature_mode: str = "one-hot-noisy"
    dim: int = 64
    noise_sigma: float = 0.1
    # agents
    vocab_size: int = 18
    hidden_size: int = 20
    init_scheme: str = "uniform"
    init_scale: float = 0.08
    temperature: float = 1.0
    # optimization
    batch_size: int = 32
    iterations: int = 3500
    learning_rate: float = 2.0
    baseline: str = "running-mean"
    baseline_decay: float = 0.99
    # evaluation and audits
    eval_interval: int = 250
    eval_mode: str = "sampled"
    transcript_mode: str = "greedy"
    transcript_passes: int = 1
    seed: int = 1

    def validate(self):
        numeric_positive = (
            "n_scenes", "test_count", "dim", "vocab_size", "hidden_size",
            "batch_size", "iterations", "eval_interval", "transcript_passes",
        )
        for name in numeric_positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0 or self.noise_sigma < 0 or self.temperature <= 0:
            raise ValueError("learning_rate/noise_sigma must be >= 0 and temperature > 0")
        if not 0 <= self.baseline_decay < 1:
            raise ValueError("baseline_decay must be in [0, 1)")
        if self.test_count >= self.n_scenes:
            raise ValueError("test_count must be smaller than n_scenes")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.baseline not in BASELINE_MODES:
            raise ValueError(f"baseline must be one of {BASELINE_MODES}")
        if self.eval_mode not in ACTION_MODES or self.transcript_mode not in ACTION_MODES:
            raise ValueError(f"eval_mode/transcript_mode must be one of {ACTION_MODES}")
        return self

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as out:
            out.write("# refgame run configuration\n")
            for f in fields(self):
                out.write(f"{f.name} = {getattr(self, f.name)}\n")

    @classmethod
    def from_file(cls, path):
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                if not sep or not key or not value:
                    raise ValueError(f"expected 'key = value' at line {lineno} of {path}")
                if key not in known:
                    raise ValueError(f"unknown config key {key!r} at line {lineno} of {path}")
                current = getattr(cls, key)
                if isinstance(current, bool):
                    kwargs[key] = value.lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    kwargs[key] = int(value)
                elif isinstance(current, float):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = value
        return cls(**kwargs).validate()

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class EvalPoint:
    iteration: int
    train_success: float  # fraction of rewarded episodes since the previous eval point
    heldout_success: float
    mean_reward: float
    baseline: float


@dataclass
class TrainStats:
    points: list = field(default_factory=list)


@dataclass
class TrainResult:
    stats: TrainStats
    speaker: object
    listener: object
    transcript: object  # Transcript over the audited split
    final_heldout_success: float


def reinforce_step(speaker, listener, episodes, config, baseline):
    """Apply one batch update in place; returns (mean reward, new baseline).

    The advantage R - baseline is shared by both agents, since both receive
    the same game point.
    """
    if not episodes:
        raise TrainingError("empty batch")
    use_baseline = config.baseline == "running-mean"
    n = len(episodes)
    acc_speaker = [np.zeros_like(speaker.attr_proj), np.zeros_like(speaker.pair_hidden),
                   np.zeros_like(speaker.pair_readout)]
    acc_listener = np.zeros_like(listener.attr_proj)
    total_reward = 0.0
    any_update = False
    for ep in episodes:
        total_reward += ep.reward
        advantage = ep.reward - (baseline if use_baseline else 0.0)
        if advantage == 0.0:
            continue
        any_update = True
        sg = speaker_backward(speaker, ep.speaker_trace, advantage)
        lg = listener_backward(listener, ep.listener_trace, advantage)
        acc_speaker[0] += sg.attr_proj
        acc_speaker[1] += sg.pair_hidden
        acc_speaker[2] += sg.pair_readout
        acc_listener += lg.attr_proj

    mean_reward = total_reward / n
    if any_update:
        scale = config.learning_rate / n
        for acc, name in zip(acc_speaker + [acc_listener],
                             ("speaker attribute map", "pair mixer", "pair readout",
                              "listener attribute map")):
            if not np.isfinite(acc).all():
                raise TrainingError(f"non-finite gradient in {name} "
                                    f"(baseline={baseline!r}, batch reward={mean_reward!r})")
        speaker.attr_proj += scale * acc_speaker[0]
        speaker.pair_hidden += scale * acc_speaker[1]
        speaker.pair_readout += scale * acc_speaker[2]
        listener.attr_proj += scale * acc_listener

    if use_baseline:
        d = config.baseline_decay
        baseline = d * baseline + (1.0 - d) * mean_reward
    return mean_reward, baseline


def evaluate(speaker, listener, scenes, mode="sampled", rng=None, temperature=1.0):
    """Fraction of rewarded episodes, one per scene, in order.

    Greedy mode takes argmax actions and is exactly reproducible; sampled
    mode draws from the action distributions and needs an rng.
    """
    if not scenes:
        raise ValueError("cannot evaluate on an empty scene list")
    if mode not in ACTION_MODES:
        raise ValueError(f"mode must be one of {ACTION_MODES}")
    greedy = mode == "greedy"
    if not greedy and rng is None:
        raise ValueError("sampled evaluation needs an rng")
    wins = 0
    for scene in scenes:
        ep = play_episode(scene, speaker, listener, rng, temperature=temperature,
                          greedy=greedy, keep_traces=False)
        wins += ep.reward
    return wins / len(scenes)


def play_split(scenes, speaker, listener, rng, mode, passes=1, temperature=1.0):
    """Episodes over a whole split, ``passes`` rounds, one episode per scene."""
    greedy = mode == "greedy"
    episodes = []
    for _ in range(passes):
        for scene in scenes:
            episodes.append(
                play_episode(scene, speaker, listener, rng, temperature=temperature,
                             greedy=greedy, keep_traces=False)
            )
    return episodes


def train(scene_set, config, *, progress=None):
    """Run the full training loop on a split SceneSet.

    Evaluates on the held-out split every ``eval_interval`` iterations (plus
    once before training and once at the end), then plays the audit
    transcript over the test split with ``transcript_mode`` actions.
    Fully reproducible from (config, seed).
    """
    config.validate()
    train_scenes = scene_set.train_scenes()
    test_scenes = scene_set.test_scenes()
    if not train_scenes:
        raise TrainingError("scene set has no train split")
    if not test_scenes:
        raise TrainingError("scene set has no test split")

    rng_init, rng_episodes, rng_eval, rng_transcript = spawn_rngs(config.seed, 4)
    speaker, listener = init_params(
        config.dim, config.vocab_size, config.hidden_size,
        scheme=config.init_scheme, rng=rng_init, scale=config.init_scale,
    )

    baseline = 0.0
    stats = TrainStats()
    window_rewards = []

    def record(iteration):
        heldout = evaluate(speaker, listener, test_scenes, config.eval_mode, rng_eval,
                           temperature=config.temperature)
        window = float(np.mean(window_rewards)) if window_rewards else float("nan")
        stats.points.append(EvalPoint(iteration, window, heldout, window, baseline))
        window_rewards.clear()
        if progress is not None:
            progress(stats.points[-1])

    record(0)
    for iteration in range(1, config.iterations + 1):
        batch = play_batch(train_scenes, speaker, listener, rng_episodes,
                           config.batch_size, temperature=config.temperature)
        mean_reward, baseline = reinforce_step(speaker, listener, batch, config, baseline)
        window_rewards.append(mean_reward)
        if iteration % config.eval_interval == 0 or iteration == config.iterations:
            record(iteration)

    audit_episodes = play_split(test_scenes, speaker, listener, rng_transcript,
                                config.transcript_mode, passes=config.transcript_passes,
                                temperature=config.temperature)
    transcript = accumulate_transcript(audit_episodes, scene_set)
    return TrainResult(
        stats=stats,
        speaker=speaker,
        listener=listener,
        transcript=transcript,
        final_heldout_success=stats.points[-1].heldout_success,
    )


# ---------------------------------------------------------------------------
# Stats table: comma-separated, one eval point per row, ready for plotting.
# ---------------------------------------------------------------------------

_STATS_HEADER = "iteration,train_success,heldout_success,mean_reward,baseline"


def write_stats(path, stats):
    with open(path, "w", encoding="utf-8") as out:
        out.write(_STATS_HEADER + "\n")
        for p in stats.points:
            out.write(f"{p.iteration},{p.train_success!r},{p.heldout_success!r},"
                      f"{p.mean_reward!r},{p.baseline!r}\n")


def read_stats(path):
    stats = TrainStats()
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != _STATS_HEADER:
            raise ValueError(f"unexpected stats header {header!r}")
        for line in f:
            if not line.strip():
                continue
            it, tr, ho, mr, b = line.strip().split(",")
            stats.points.append(EvalPoint(int(it), float(tr), float(ho), float(mr), float(b)))
    return stats
