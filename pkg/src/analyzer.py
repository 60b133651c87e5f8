import os
import json
import logging
from datetime import datetime
from typing import Optional

import pandas as pd
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import seaborn as sns

logger = logging.getLogger(__name__)


class TrainingAnalyzer:
    """
    Reads a training metrics log and produces summary reports and loss curves
    """

    def __init__(self, metrics_path: str):
        if not os.path.exists(metrics_path):
            raise FileNotFoundError(f"Metrics log {metrics_path} does not exist")
        self.metrics_path = metrics_path
        self.metrics = pd.read_csv(metrics_path)

    def generate_report(self, window: int = 50) -> dict:
        """Summary of the run: iterations, loss at start/end, best loss, coverage penalty"""
        df = self.metrics
        if df.empty:
            return {"message": "No training iterations logged"}

        tail = df.tail(window)
        return {
            "generated_at": datetime.now().isoformat(),
            "metrics_log": self.metrics_path,
            "summary": {
                "iterations": int(df['iteration'].max()),
                "first_loss": float(df['loss'].iloc[0]),
                "last_loss": float(df['loss'].iloc[-1]),
                "min_loss": float(df['loss'].min()),
                "min_loss_iteration": int(df.loc[df['loss'].idxmin(), 'iteration']),
            },
            "recent": {
                "window": int(len(tail)),
                "mean_loss": float(tail['loss'].mean()),
                "mean_coverage_penalty": float(tail['coverage_penalty'].mean()),
            },
            "mean_coverage_penalty": float(df['coverage_penalty'].mean()),
        }

    def plot_loss_curve(self, save_path: str = "reports/training_loss.png", smoothing: int = 20):
        """Loss and coverage penalty per iteration, with a rolling mean"""
        df = self.metrics
        if df.empty:
            logger.warning("No training data available for plotting")
            return None

        sns.set_theme(style='whitegrid')
        fig, (ax_loss, ax_cov) = plt.subplots(2, 1, figsize=(12, 6), sharex=True)
        ax_loss.plot(df['iteration'], df['loss'], alpha=0.3, label='loss')
        ax_loss.plot(df['iteration'], df['loss'].rolling(smoothing, min_periods=1).mean(), label=f'rolling mean ({smoothing})')
        ax_loss.set_title('Training Loss')
        ax_loss.set_ylabel('Loss')
        ax_loss.legend()

        ax_cov.plot(df['iteration'], df['coverage_penalty'], color='tab:orange')
        ax_cov.set_title('Coverage Penalty per Decoder Step')
        ax_cov.set_xlabel('Iteration')
        ax_cov.set_ylabel('Penalty')

        fig.tight_layout()
        directory = os.path.dirname(save_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        fig.savefig(save_path)
        plt.close(fig)
        logger.info(f"Loss curve saved to {save_path}")
        return save_path

    def save_report(self, filename: Optional[str] = None) -> str:
        if filename is None:
            filename = f"reports/training_report_{datetime.now().strftime('%Y%m%d_%H%M%S')}.json"

        report = self.generate_report()
        directory = os.path.dirname(filename)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(filename, 'w') as f:
            json.dump(report, f, indent=2)

        logger.info(f"Training report saved to {filename}")
        return filename


SWEEP_LABELS = {
    'w1': ('Summary Quality vs Attention Weight', 'w1 (w2 = 1 - w1)'),
    'fraction': ('Summary Quality vs Training Set Size', 'Fraction of the training set'),
    'batch_size': ('Summary Quality vs Minibatch Size', 'Minibatch size'),
    'learning_rate': ('Summary Quality vs Learning Rate', 'Adagrad learning rate'),
    'iterations': ('Summary Quality vs Training Iterations', 'Training iterations'),
}


def plot_sweep(sweep: pd.DataFrame, axis: str = 'w1', save_path: Optional[str] = None):
    """ROUGE F1 against the swept setting (the column named `axis`)"""
    if sweep.empty:
        logger.warning(f"Empty {axis} sweep, nothing to plot")
        return None
    if axis not in sweep:
        raise ValueError(f"Sweep table has no {axis!r} column")
    save_path = save_path or f"reports/{axis}_sweep.png"
    title, xlabel = SWEEP_LABELS.get(axis, (f"Summary Quality vs {axis}", axis))

    sns.set_theme(style='whitegrid')
    fig, ax = plt.subplots(figsize=(8, 5))
    for column, label in (('r1_f1', 'ROUGE-1'), ('r2_f1', 'ROUGE-2'), ('rl_f1', 'ROUGE-L')):
        if column in sweep:
            sns.lineplot(data=sweep, x=axis, y=column, marker='o', label=label, ax=ax)
    if axis == 'batch_size':
        ax.set_xscale('log', base=2)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel('F1')

    fig.tight_layout()
    directory = os.path.dirname(save_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(save_path)
    plt.close(fig)
    logger.info(f"{axis} sweep plot saved to {save_path}")
    return save_path
