#!/usr/bin/env python3
"""
Tests for Adagrad, gradient clipping, the training loop, metrics and resume
"""
import os
import sys
import math
import tempfile
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

import numpy as np

from corpus import Chunk
from checkpoint import load_model
from train import (AdagradOptimizer, TrainConfig, Trainer, TrainingError, adagrad_update, clip_by_global_norm,
                   global_norm, latest_checkpoint, train)
from synthetic import toy_example, toy_model, toy_vocab


def toy_setup(n_examples=4, seed=0, dtype='float64'):
    vocab = toy_vocab()
    model = toy_model(seed=seed, dtype=dtype)
    examples = [toy_example(model, vocab, seed=seed + k)[1] for k in range(n_examples)]
    return vocab, model, examples


def small_config(**overrides):
    settings = dict(batch_size=2, max_iterations=1000, checkpoint_every=1000, log_every=1000, seed=0)
    settings.update(overrides)
    return TrainConfig(**settings)


def test_adagrad_example():
    param, acc = adagrad_update(np.array([1.0]), np.array([0.5]), np.array([0.1]), 0.15)
    assert abs(acc[0] - 0.35) < 1e-12
    assert abs(param[0] - (1.0 - 0.15 * 0.5 / (math.sqrt(0.35) + 1e-10))) < 1e-12
    assert abs(param[0] - 0.8732) < 1e-4


def test_adagrad_zero_gradient():
    param, acc = adagrad_update(np.array([1.0, -2.0]), np.zeros(2), np.array([0.1, 0.1]), 0.15)
    assert np.array_equal(param, [1.0, -2.0])
    assert np.array_equal(acc, [0.1, 0.1])


def test_adagrad_steps_shrink():
    param, acc = np.array([1.0]), np.array([0.1])
    grad = np.array([0.5])
    after_one, acc = adagrad_update(param, grad, acc, 0.15)
    after_two, acc2 = adagrad_update(after_one, grad, acc, 0.15)
    assert abs(after_two[0] - after_one[0]) < abs(after_one[0] - param[0])
    assert acc2[0] > acc[0]


def test_adagrad_shape_mismatch():
    try:
        adagrad_update(np.zeros(2), np.zeros(3), np.zeros(2), 0.15)
    except ValueError:
        return
    raise AssertionError("mismatched shapes accepted")


def test_optimizer_updates_in_place():
    params = {'w': np.array([1.0, 2.0])}
    optimizer = AdagradOptimizer(params, lr=0.15, initial_accumulator=0.1)
    view = params['w']
    optimizer.step(params, {'w': np.array([0.5, 0.0])})
    assert params['w'] is view
    assert abs(view[0] - 0.8732) < 1e-4 and view[1] == 2.0
    assert np.allclose(optimizer.accumulators['w'], [0.35, 0.1])


def test_clipping_bounds_global_norm():
    rng = np.random.default_rng(0)
    grads = {'a': rng.normal(size=(3, 4)) * 5, 'b': rng.normal(size=7) * 5}
    clipped, norm = clip_by_global_norm(grads, 2.0)
    assert norm > 2.0
    assert global_norm(clipped) <= 2.0 + 1e-9
    assert np.allclose(clipped['a'] / grads['a'], 2.0 / norm)

    small = {'a': np.array([0.3, 0.4])}
    assert clip_by_global_norm(small, 2.0)[0] is small
    assert clip_by_global_norm(grads, 0.0)[0] is grads


def test_train_config_validation():
    for overrides in ({'batch_size': 0}, {'learning_rate': 0.0}, {'grad_clip_norm': -1.0}):
        try:
            TrainConfig(**overrides).validate()
        except ValueError:
            continue
        raise AssertionError(f"{overrides} accepted")


def test_batches_cover_each_epoch():
    _, model, examples = toy_setup(n_examples=5)
    trainer = Trainer(model, examples, small_config(batch_size=2))
    assert trainer.steps_per_epoch == 3
    for epoch in range(2):
        seen = [i for it in range(3 * epoch, 3 * epoch + 3) for i in trainer.batch_indices(it)]
        assert sorted(seen) == list(range(5))
    assert trainer.batch_indices(0) == trainer.batch_indices(0)


def test_loss_decreases_on_fixed_batch():
    _, model, examples = toy_setup(n_examples=2)
    before = np.mean([model.loss(e) for e in examples])
    rows = Trainer(model, examples, small_config(batch_size=2)).train(50)
    after = np.mean([model.loss(e) for e in examples])
    assert len(rows) == 50 and rows[-1]['iteration'] == 50
    assert after < before
    assert rows[-1]['loss'] < rows[0]['loss']


def test_accumulators_non_decreasing():
    _, model, examples = toy_setup()
    trainer = Trainer(model, examples, small_config())
    previous = {name: acc.copy() for name, acc in trainer.optimizer.accumulators.items()}
    for it in range(3):
        trainer.train_step(it)
        for name, acc in trainer.optimizer.accumulators.items():
            assert np.all(acc >= previous[name])
            previous[name] = acc.copy()


def test_identical_seeds_give_identical_metrics():
    with tempfile.TemporaryDirectory() as tmp:
        contents = []
        for run in ('a', 'b'):
            _, model, examples = toy_setup(dtype='float32')
            trainer = Trainer(model, examples, small_config(), checkpoint_dir=os.path.join(tmp, run))
            trainer.train(6)
            with open(os.path.join(tmp, run, 'metrics.csv'), 'rb') as f:
                contents.append(f.read())
        assert contents[0] == contents[1]
        assert contents[0].startswith(b'iteration,loss,coverage_penalty\n')
        assert len(contents[0].splitlines()) == 7


def test_resume_follows_uninterrupted_trajectory():
    with tempfile.TemporaryDirectory() as tmp:
        _, model, examples = toy_setup(dtype='float32')
        straight = Trainer(model, examples, small_config(), checkpoint_dir=os.path.join(tmp, 'straight'))
        expected_rows = straight.train(6)

        _, model, examples = toy_setup(dtype='float32')
        resumed_dir = os.path.join(tmp, 'resumed')
        Trainer(model, examples, small_config(), checkpoint_dir=resumed_dir).train(3)
        path = latest_checkpoint(resumed_dir)
        assert path.endswith('ckpt-0000003.ckpt')

        reloaded, metadata, accumulators = load_model(path)
        trainer = Trainer(reloaded, examples, small_config(), checkpoint_dir=resumed_dir,
                          start_iteration=metadata['iteration'], accumulators=accumulators)
        rows = trainer.train(3)
        assert rows == expected_rows[3:]
        for name, value in straight.model.params.items():
            assert np.array_equal(trainer.model.params[name], value)

        metrics = trainer.metrics.read()
        assert list(metrics['iteration']) == [1, 2, 3, 4, 5, 6]
        assert np.allclose(metrics['loss'], [r['loss'] for r in expected_rows], rtol=1e-12)


def test_checkpoint_cadence_and_exit_save():
    with tempfile.TemporaryDirectory() as tmp:
        _, model, examples = toy_setup()
        Trainer(model, examples, small_config(checkpoint_every=2), checkpoint_dir=tmp).train(5)
        names = sorted(f for f in os.listdir(tmp) if f.endswith('.ckpt'))
        assert names == ['ckpt-0000002.ckpt', 'ckpt-0000004.ckpt', 'ckpt-0000005.ckpt']
        _, metadata, _ = load_model(os.path.join(tmp, names[-1]))
        assert metadata['iteration'] == 5
        assert metadata['train_config']['checkpoint_every'] == 2


def test_coverage_can_start_late():
    _, model, examples = toy_setup()
    trainer = Trainer(model, examples, small_config(coverage_start_iteration=10))
    assert trainer.lambda_cov_at(9) == 0.0
    assert trainer.lambda_cov_at(10) == model.config.lambda_cov


def test_non_finite_loss_names_the_batch():
    _, model, examples = toy_setup()
    trainer = Trainer(model, examples, small_config())
    model.params['out_b'][0] = np.inf
    try:
        trainer.train_step(0)
    except TrainingError as e:
        assert 'iteration 1' in str(e)
        assert str(trainer.batch_indices(0)) in str(e)
        return
    raise AssertionError("non-finite parameters trained")


def test_train_rejects_missing_references():
    vocab, model, _ = toy_setup()
    for chunks in ([], [Chunk(["tok01"], ["tok01"]), Chunk(["tok02"])]):
        try:
            train(chunks, vocab, model, small_config(), iterations=1)
        except ValueError:
            continue
        raise AssertionError("invalid training set accepted")


def main():
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith('test_') and callable(fn)]
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {e!r}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
