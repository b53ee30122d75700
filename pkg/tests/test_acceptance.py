"""Acceptance suite: one test per criterion, each printing a PASS line.

Heavy criteria (1, 3, 5) train real agents; the whole module runs in a few
minutes on one core.  Every tolerance is fixed here, not calibrated at
runtime.
"""

import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as scipy_stats

from refgame.agents import (
    init_params,
    listener_backward,
    listener_distribution,
    listener_forward,
    speaker_backward,
    speaker_distribution,
    speaker_forward,
)
from refgame.analysis import align_attributes, gold_similarity, referential_inconsistency
from refgame.cli import main as cli_main
from refgame.datasets import (
    AttributeSchema,
    ObjectSpec,
    Scene,
    SceneSet,
    attributes_of,
    generate_shapes,
    split_train_test,
)
from refgame.game import Episode, accumulate_transcript, play_batch
from refgame.numerics import make_rng
from refgame.training import TrainConfig, evaluate, reinforce_step, train


def report(criterion, detail):
    print(f"[criterion {criterion}] PASS - {detail}")


# ---------------------------------------------------------------------------
# Criterion 1: learning happens at the stated scale and speed.
# ---------------------------------------------------------------------------


def test_criterion_1_learning_happens():
    config = TrainConfig(iterations=10_000, eval_interval=500, seed=1).validate()
    assert config.vocab_size == 18 and config.dim == 64  # stock defaults
    scene_set = generate_shapes(
        config.n_scenes, feature_mode=config.feature_mode, dim=config.dim,
        noise_sigma=config.noise_sigma, seed=config.seed,
    )
    scene_set = split_train_test(scene_set, config.test_count, seed=config.seed)
    assert len(scene_set.test_scenes()) == 1000

    t0 = time.time()
    result = train(scene_set, config)
    elapsed = time.time() - t0

    best = max(p.heldout_success for p in result.stats.points)
    first = next((p.iteration for p in result.stats.points if p.heldout_success >= 0.75), None)
    assert first is not None and first <= 10_000, f"never reached 0.75 (best {best:.3f})"
    assert elapsed <= 300, f"took {elapsed:.0f}s, budget is 300s"

    final = result.final_heldout_success
    wins = round(final * 1000)
    p_value = scipy_stats.binomtest(wins, 1000, 0.5, alternative="greater").pvalue
    assert p_value < 1e-3
    report(1, f"held-out success {final:.3f} (>=0.75 first at iteration {first}, "
              f"binomial p={p_value:.2e}, {elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# Criterion 2: untrained agents sit at chance.
# ---------------------------------------------------------------------------


def test_criterion_2_chance_baseline():
    scene_set = split_train_test(generate_shapes(5000, seed=2), 1000, seed=2)
    speaker, listener = init_params(64, 18, 20, "uniform", make_rng(3))
    rng = make_rng(4)
    test_scenes = scene_set.test_scenes()
    wins = 0
    for _ in range(10):  # 10 passes x 1000 scenes = 10k episodes
        wins += evaluate(speaker, listener, test_scenes, "sampled", rng) * len(test_scenes)
    rate = wins / 10_000
    assert 0.485 <= rate <= 0.515, f"untrained success {rate:.4f} outside 0.50 +/- 0.015"
    report(2, f"untrained success {rate:.4f} over 10k held-out episodes")


# ---------------------------------------------------------------------------
# Criterion 3: the vocabulary-size contrast in referential inconsistency.
# ---------------------------------------------------------------------------


def test_criterion_3_vocabulary_contrast():
    scene_set = split_train_test(generate_shapes(10_000, seed=7), 1000, seed=7)
    lines = []
    for seed in (1, 2, 3):
        cfg18 = TrainConfig(iterations=15_000, eval_interval=1000, vocab_size=18, seed=seed)
        r18 = train(scene_set, cfg18)
        ri18 = referential_inconsistency(r18.transcript, vocab_size=18)
        assert r18.final_heldout_success >= 0.75, (
            f"seed {seed}: V=18 reached only {r18.final_heldout_success:.3f}"
        )

        cfg2 = TrainConfig(iterations=6_000, eval_interval=1000, vocab_size=2, seed=seed)
        r2 = train(scene_set, cfg2)
        ri2 = referential_inconsistency(r2.transcript, vocab_size=2)
        assert r2.final_heldout_success >= 0.70, (
            f"seed {seed}: V=2 reached only {r2.final_heldout_success:.3f}"
        )

        p18 = ri18.proportion_inconsistent
        p2 = ri2.proportion_inconsistent
        assert p2 == 1.0, f"seed {seed}: V=2 proportion {p2:.3f} != 1.0"
        assert p18 <= 0.2, f"seed {seed}: V=18 proportion {p18:.3f} > 0.2"
        assert p2 > p18, f"seed {seed}: contrast violated ({p2:.3f} vs {p18:.3f})"
        lines.append(f"seed {seed}: V=2 {p2:.2f} > V=18 {p18:.3f}")
    report(3, "; ".join(lines))


# ---------------------------------------------------------------------------
# Criterion 4: analytic gradients match central finite differences.
# ---------------------------------------------------------------------------


def _fd_grads(fn, mats, eps=1e-5):
    grads = []
    for mat in mats:
        g = np.zeros_like(mat)
        it = np.nditer(mat, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = mat[idx]
            mat[idx] = orig + eps
            hi = fn()
            mat[idx] = orig - eps
            lo = fn()
            mat[idx] = orig
            g[idx] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def test_criterion_4_gradient_correctness():
    worst = 0.0
    for seed in range(25):  # >= 20 random small instances
        rng = make_rng(1000 + seed)
        speaker, listener = init_params(6, 4, 3, "uniform", rng, 0.5)
        ref = rng.normal(size=6)
        ctx = rng.normal(size=6)

        strace = speaker_forward(speaker, ref, ctx, rng)
        sgrads = speaker_backward(speaker, strace, 1.0)

        def speaker_logp():
            probs, _ = speaker_distribution(speaker, ref, ctx)
            return float(np.log(probs[strace.attribute]))

        fd = _fd_grads(speaker_logp, [speaker.attr_proj, speaker.pair_hidden, speaker.pair_readout])
        for analytic, numeric in zip((sgrads.attr_proj, sgrads.pair_hidden, sgrads.pair_readout), fd):
            err = _rel(analytic, numeric)
            worst = max(worst, err)
            assert err < 1e-4

        a = int(rng.integers(0, 4))
        ltrace = listener_forward(listener, ref, ctx, a, rng)
        lgrads = listener_backward(listener, ltrace, 1.0)

        def listener_logp():
            probs, _ = listener_distribution(listener, ref, ctx, a)
            return float(np.log(probs[ltrace.choice]))

        fd = _fd_grads(listener_logp, [listener.attr_proj])
        err = _rel(lgrads.attr_proj, fd[0])
        worst = max(worst, err)
        assert err < 1e-4
    report(4, f"25 instances (D=6, V=4, h=3), worst relative error {worst:.2e}")


# ---------------------------------------------------------------------------
# Criterion 5: the REINFORCE estimator is unbiased on an enumerable instance.
# ---------------------------------------------------------------------------


def tiny_frozen_instance(dim=4, vocab=3, hidden=3, seed=30):
    """Two hand-built scenes and small agents, everything frozen."""
    rng = make_rng(seed)
    scenes = []
    schema = AttributeSchema(groups=(("attrs", ("g0", "g1", "g2")),))
    for sid in range(2):
        ref = ObjectSpec(None, rng.normal(size=dim).astype(np.float32))
        ctx = ObjectSpec(None, rng.normal(size=dim).astype(np.float32))
        scenes.append(Scene(sid, ref, ctx, frozenset({sid}), referent_id=10 + sid,
                            context_id=20 + sid, split="train"))
    speaker, listener = init_params(dim, vocab, hidden, "uniform", rng, 0.5)
    return SceneSet(scenes=tuple(scenes), schema=schema, dim=dim), speaker, listener


def enumerate_exact_gradient(scenes, speaker, listener, eps=1e-5):
    """Central finite differences of the exactly enumerated expected reward.

    J = mean over scenes, uniform over presentation orders, of
    sum_a p(a) sum_o p(o) R(o); fully independent of the backward passes.
    """

    def exact_j():
        total = 0.0
        for scene in scenes:
            ref = np.asarray(scene.referent.feature, dtype=np.float64)
            ctx = np.asarray(scene.context.feature, dtype=np.float64)
            p_attr, _ = speaker_distribution(speaker, ref, ctx)
            for slot in (0, 1):
                feats = (ref, ctx) if slot == 0 else (ctx, ref)
                for a in range(speaker.vocab):
                    p_choice, _ = listener_distribution(listener, feats[0], feats[1], a)
                    total += 0.5 * p_attr[a] * p_choice[slot]
        return total / len(scenes)

    mats = {
        "speaker.attr_proj": speaker.attr_proj,
        "speaker.pair_hidden": speaker.pair_hidden,
        "speaker.pair_readout": speaker.pair_readout,
        "listener.attr_proj": listener.attr_proj,
    }
    out = {}
    for name, mat in mats.items():
        g = np.zeros_like(mat)
        it = np.nditer(mat, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = mat[idx]
            mat[idx] = orig + eps
            hi = exact_j()
            mat[idx] = orig - eps
            lo = exact_j()
            mat[idx] = orig
            g[idx] = (hi - lo) / (2 * eps)
        out[name] = g
    return out


def mc_gradient_estimate(scenes, speaker, listener, config, n_episodes, seed):
    """Batch-mean REINFORCE gradients recovered from the production update path.

    Runs reinforce_step with frozen parameters (restoring them after every
    batch) and recovers each batch's mean gradient from the applied update.
    Returns per-component means and standard errors over batches.
    """
    config.learning_rate = 1.0
    rng = make_rng(seed)
    n_batches = n_episodes // config.batch_size
    mats = [speaker.attr_proj, speaker.pair_hidden, speaker.pair_readout, listener.attr_proj]
    frozen = [m.copy() for m in mats]
    sums = [np.zeros_like(m) for m in mats]
    sq_sums = [np.zeros_like(m) for m in mats]
    baseline = 0.0
    for _ in range(n_batches):
        episodes = play_batch(list(scenes), speaker, listener, rng, config.batch_size)
        _, baseline = reinforce_step(speaker, listener, episodes, config, baseline)
        for mat, cold, s, sq in zip(mats, frozen, sums, sq_sums):
            g = mat - cold
            s += g
            sq += g * g
            np.copyto(mat, cold)
    names = ["speaker.attr_proj", "speaker.pair_hidden", "speaker.pair_readout",
             "listener.attr_proj"]
    means, sigmas = {}, {}
    for name, s, sq in zip(names, sums, sq_sums):
        mean = s / n_batches
        var = sq / n_batches - mean * mean
        sigmas[name] = np.sqrt(np.maximum(var, 0.0) / n_batches)
        means[name] = mean
    return means, sigmas


def test_criterion_5_unbiased_policy_gradient():
    scene_set, speaker, listener = tiny_frozen_instance()
    scenes = list(scene_set.scenes)
    exact = enumerate_exact_gradient(scenes, speaker, listener)
    details = []
    for mode in ("none", "running-mean"):
        cfg = TrainConfig(baseline=mode).validate()
        est, sigma = mc_gradient_estimate(scenes, speaker, listener, cfg,
                                          n_episodes=200_000, seed=31)
        worst_z = 0.0
        for name in exact:
            diff = np.abs(est[name] - exact[name])
            bound = 3 * sigma[name] + 1e-9
            assert np.all(diff <= bound), f"{mode}/{name}: bias beyond 3 sigma"
            with np.errstate(invalid="ignore", divide="ignore"):
                z = np.where(sigma[name] > 0, diff / sigma[name], 0.0)
            worst_z = max(worst_z, float(z.max()))
        details.append(f"{mode}: worst z={worst_z:.2f}")
    report(5, "200k episodes each, component-wise within 3 sigma (" + "; ".join(details) + ")")


# ---------------------------------------------------------------------------
# Criterion 6: audit metrics equal brute-force recomputations on fixtures.
# ---------------------------------------------------------------------------


def _stub_scene(scene_id, referent_id, context_id, gold):
    feat = np.zeros(2, dtype=np.float32)
    return Scene(scene_id, ObjectSpec(None, feat), ObjectSpec(None, feat),
                 frozenset(gold), referent_id=referent_id, context_id=context_id)


def _stub_set(scenes, n_attr):
    schema = AttributeSchema(groups=(("attrs", tuple(f"g{i}" for i in range(n_attr))),))
    return SceneSet(scenes=tuple(scenes), schema=schema, dim=2)


def test_criterion_6_metric_oracles():
    # --- referential inconsistency, exact rationals ---
    # episode log: a=5 spoken with x as referent (s0), with x as context (s1),
    # leaving R(x)={5}, C(x)={5}, R(z)={5}, C(y)={5}; a=6 only with y referent.
    scenes = [
        _stub_scene(0, 1, 2, {0}),  # x vs y
        _stub_scene(1, 3, 1, {1}),  # z vs x
        _stub_scene(2, 2, 4, {2}),  # y vs w
    ]
    ss = _stub_set(scenes, 3)
    episodes = [Episode(0, 0, 5, 0, 1, 0.0, 0.0),
                Episode(1, 0, 5, 0, 1, 0.0, 0.0),
                Episode(2, 0, 6, 0, 1, 0.0, 0.0)]
    transcript = accumulate_transcript(episodes, ss)
    ri = referential_inconsistency(transcript, vocab_size=7)
    # attribute 5 hand count: overlap images {x}; union images {x, y, z} -> 1/3
    row5 = ri.rows[5]
    assert Fraction(row5.overlap_images, row5.active_images) == Fraction(1, 3)
    # attribute 6: R(y)={6}, C(w)={6}; no image holds it in both roles -> 0/2
    row6 = ri.rows[6]
    assert Fraction(row6.overlap_images, row6.active_images) == Fraction(0, 2)
    assert ri.n_active == 2 and ri.n_inconsistent == 1

    # the formula on directly given activation sets: a in R(x), C(x), R(y),
    # not in C(y) -> one overlap image over two union images
    from refgame.game import Transcript

    direct = Transcript(
        episodes=[Episode(0, 0, 4, 0, 1, 0.0, 0.0)],
        referent_uses={"x": {4}, "y": {4}},
        context_uses={"x": {4}},
    )
    row4 = referential_inconsistency(direct, vocab_size=5).rows[4]
    assert Fraction(row4.overlap_images, row4.active_images) == Fraction(1, 2)

    # --- alignment, greedy fixture ---
    scenes = [_stub_scene(0, 1, 2, {0}), _stub_scene(1, 3, 4, {1}), _stub_scene(2, 5, 6, {2})]
    ss = _stub_set(scenes, 3)
    episodes = ([Episode(0, 0, 0, 0, 1, 0.0, 0.0)] * 5 + [Episode(1, 0, 0, 0, 1, 0.0, 0.0)] * 1
                + [Episode(0, 0, 1, 0, 1, 0.0, 0.0)] * 4 + [Episode(2, 0, 2, 0, 1, 0.0, 0.0)] * 2)
    transcript = accumulate_transcript(episodes, ss)
    amap = align_attributes(transcript, ss, vocab_size=3)
    assert np.array_equal(amap.counts, [[5, 1, 0], [4, 0, 0], [0, 0, 2]])
    assert amap.mapping == {0: 0, 2: 2}
    assert amap.unaligned == [1]

    # --- similarity, hand-computed cosines ---
    scenes = [_stub_scene(0, 1, 2, {0}), _stub_scene(1, 3, 4, {1}), _stub_scene(2, 5, 6, {0, 1})]
    ss = _stub_set(scenes, 3)
    episodes = ([Episode(0, 0, 0, 0, 1, 0.0, 0.0)] * 2 + [Episode(1, 0, 1, 0, 1, 0.0, 0.0)] * 2
                + [Episode(2, 0, 0, 0, 1, 0.0, 0.0)])
    transcript = accumulate_transcript(episodes, ss)
    sim = gold_similarity(transcript, ss, vocab_size=2)
    # usage rows: g0=[3,0], g1=[1,2], g2=[0,0]
    assert np.array_equal(sim.usage, [[3.0, 0.0], [1.0, 2.0], [0.0, 0.0]])
    expected = 3.0 / (3.0 * np.sqrt(5.0))
    assert abs(sim.cosine[0, 1] - expected) < 1e-9
    assert sim.zero_rows == [2]
    report(6, "RI rationals, greedy alignment, and cosine matrix all match brute force")


# ---------------------------------------------------------------------------
# Criterion 7: gold annotations equal the independent set-difference oracle.
# ---------------------------------------------------------------------------


def test_criterion_7_gold_attribute_correctness():
    scene_set = generate_shapes(1000, seed=77)
    offsets = scene_set.schema.group_offsets
    for s in scene_set.scenes:
        ref = {offsets[g] + v for g, v in enumerate(s.referent.values)}
        ctx = {offsets[g] + v for g, v in enumerate(s.context.values)}
        assert s.gold_attributes == frozenset(ref - ctx)
        assert len(s.gold_attributes) > 0
        assert s.gold_attributes == attributes_of(s.referent, scene_set.schema) - attributes_of(
            s.context, scene_set.schema
        )
    report(7, "1000 generated scenes match the set-difference oracle, none empty")


# ---------------------------------------------------------------------------
# Criterion 8: the run pipeline is byte-for-byte reproducible.
# ---------------------------------------------------------------------------


def test_criterion_8_run_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "n_scenes = 600\ntest_count = 150\niterations = 300\neval_interval = 100\nseed = 5\n"
    )
    assert cli_main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli_main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("stats.csv", "transcript.tsv", "checkpoint.bin"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"
    report(8, "stats, transcript and checkpoint identical across reruns")
