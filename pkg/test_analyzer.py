#!/usr/bin/env python3
"""
Tests for training reports, loss curves, sweep plots and the self-check
"""
import os
import sys
import json
import tempfile
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pandas as pd

from analyzer import TrainingAnalyzer, plot_sweep
from train import METRICS_COLUMNS
from self_check import run_self_check
from corpus import Chunk
from sweep import SWEEP_AXES, training_subset


def write_metrics(path, rows):
    pd.DataFrame(rows, columns=METRICS_COLUMNS).to_csv(path, index=False)
    return path


def test_report_summary():
    with tempfile.TemporaryDirectory() as tmp:
        rows = [(1, 5.0, 0.2), (2, 4.0, 0.1), (3, 4.5, 0.3)]
        analyzer = TrainingAnalyzer(write_metrics(os.path.join(tmp, 'metrics.csv'), rows))
        report = analyzer.generate_report(window=2)
    summary = report['summary']
    assert summary['iterations'] == 3
    assert summary['first_loss'] == 5.0 and summary['last_loss'] == 4.5
    assert summary['min_loss'] == 4.0 and summary['min_loss_iteration'] == 2
    assert report['recent']['window'] == 2
    assert abs(report['recent']['mean_loss'] - 4.25) < 1e-12
    assert abs(report['mean_coverage_penalty'] - 0.2) < 1e-12


def test_empty_metrics():
    with tempfile.TemporaryDirectory() as tmp:
        analyzer = TrainingAnalyzer(write_metrics(os.path.join(tmp, 'metrics.csv'), []))
        assert 'message' in analyzer.generate_report()
        assert analyzer.plot_loss_curve(os.path.join(tmp, 'loss.png')) is None


def test_missing_metrics_log():
    try:
        TrainingAnalyzer('/nonexistent/metrics.csv')
    except FileNotFoundError:
        return
    raise AssertionError("missing metrics log accepted")


def test_plots_and_saved_report():
    with tempfile.TemporaryDirectory() as tmp:
        rows = [(i, 5.0 / i, 0.1) for i in range(1, 31)]
        analyzer = TrainingAnalyzer(write_metrics(os.path.join(tmp, 'metrics.csv'), rows))
        loss_png = analyzer.plot_loss_curve(os.path.join(tmp, 'reports', 'loss.png'))
        assert os.path.getsize(loss_png) > 0

        path = analyzer.save_report(os.path.join(tmp, 'reports', 'report.json'))
        with open(path) as f:
            assert json.load(f)['summary']['iterations'] == 30

        sweep = pd.DataFrame({'w1': [0.5, 1.0], 'w2': [0.5, 0.0], 'r1_f1': [0.3, 0.25],
                              'r2_f1': [0.1, 0.08], 'rl_f1': [0.2, 0.18]})
        sweep_png = plot_sweep(sweep, 'w1', os.path.join(tmp, 'sweep.png'))
        assert os.path.getsize(sweep_png) > 0
        assert plot_sweep(sweep.iloc[0:0], 'w1', os.path.join(tmp, 'empty.png')) is None


def test_fraction_and_hyperparameter_sweep_plots():
    scores = {'r1_f1': [0.20, 0.26, 0.30], 'r2_f1': [0.05, 0.07, 0.09], 'rl_f1': [0.15, 0.19, 0.22]}
    with tempfile.TemporaryDirectory() as tmp:
        for axis, values in (('fraction', [0.1, 0.5, 1.0]), ('batch_size', [8, 16, 32]),
                             ('learning_rate', [0.05, 0.15, 0.30]), ('iterations', [100, 200, 300])):
            sweep = pd.DataFrame({axis: values, **scores})
            png = plot_sweep(sweep, axis, os.path.join(tmp, f"{axis}.png"))
            assert os.path.getsize(png) > 0
        try:
            plot_sweep(pd.DataFrame({'w1': [0.5], **{k: v[:1] for k, v in scores.items()}}), 'fraction')
        except ValueError:
            pass
        else:
            raise AssertionError("plot of a missing column accepted")


def test_training_subsets_nest_and_keep_order():
    chunks = [Chunk([f"word{i}"]) for i in range(20)]
    sizes = []
    previous = []
    for fraction in SWEEP_AXES['fraction'].defaults:
        subset = training_subset(chunks, fraction, seed=3)
        positions = [chunks.index(c) for c in subset]
        assert positions == sorted(positions)
        assert all(c in subset for c in previous)
        sizes.append(len(subset))
        previous = subset
    assert sizes == [2, 4, 6, 8, 10, 12, 14, 16, 18, 20]
    assert training_subset(chunks, 1.0) == chunks
    for bad in (0.0, 1.5):
        try:
            training_subset(chunks, bad)
        except ValueError:
            continue
        raise AssertionError(f"fraction {bad} accepted")


def test_sweep_axis_parsing():
    assert SWEEP_AXES['batch_size'].parse('8,16') == [8, 16]
    assert SWEEP_AXES['learning_rate'].parse('0.05, 0.3') == [0.05, 0.3]
    assert SWEEP_AXES['w1'].defaults[-1] == 1.0


def test_self_check_passes():
    assert run_self_check(iterations=4) == 0


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
