#!/usr/bin/env python3
"""
Debug script for the model's analytic gradients
Runs a finite-difference check of the full step loss on toy dimensions and
prints the error of every parameter tensor.
"""

import sys
import argparse
import logging
sys.path.append('src')

from numerics import grad_check
from synthetic import toy_example, toy_model, toy_vocab

# Set up debug logging
logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')


def check_model_gradients(seed: int = 0, w1: float = 0.5, lambda_cov: float = 1.0, tolerance: float = 1e-4):
    """Gradient check with per-tensor output"""
    print("=" * 60)
    print("Model Gradient Check (hidden 8, embed 4, vocab 20, N=5, T=4)")
    print("=" * 60)

    vocab = toy_vocab(20)
    model = toy_model(20, seed=seed, w1=w1, w2=round(1.0 - w1, 12), lambda_cov=lambda_cov)
    _, example = toy_example(model, vocab, source_len=5, target_len=3, seed=seed)
    names = sorted(model.params)

    def loss_fn(nodes):
        p = dict(zip(names, nodes))
        loss, _ = model.forward_example(p, example)
        return loss

    try:
        report = grad_check(loss_fn, [model.params[name] for name in names], epsilon=1e-5, names=names)

        print(f"{'parameter':<16} {'rel. error':>12} {'norm ratio':>12} {'max |a-n|':>12}")
        print("-" * 55)
        for name in names:
            marker = "✅" if report.errors[name] < tolerance else "❌"
            print(f"{name:<16} {report.errors[name]:12.3e} {report.norm_errors[name]:12.3e} {report.max_abs_diff[name]:12.3e} {marker}")
        print()

        if report.passed(tolerance):
            print(f"✅ All gradients agree (max relative error {report.max_error:.3e})")
            return 0
        print(f"❌ Max relative error {report.max_error:.3e} exceeds {tolerance:.0e}")
        return 1

    except Exception as e:
        print(f"❌ Error: {e}")
        return 1


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Finite-difference check of the model gradients')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--w1', type=float, default=0.5)
    parser.add_argument('--lambda-cov', type=float, default=1.0)
    args = parser.parse_args()
    sys.exit(check_model_gradients(args.seed, args.w1, args.lambda_cov))
