import os
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import pandas as pd

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['pair_id', 'r1_p', 'r1_r', 'r1_f1', 'r2_p', 'r2_r', 'r2_f1', 'rl_p', 'rl_r', 'rl_f1']
VARIANTS = ('r1', 'r2', 'rl')


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, candidate_total: int, reference_total: int) -> 'RougeScore':
        precision = overlap / candidate_total if candidate_total else 0.0
        recall = overlap / reference_total if reference_total else 0.0
        return cls(precision, recall, f1_score(precision, recall))


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _fold(tokens: Sequence[str]) -> List[str]:
    return [t.casefold() for t in tokens]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> RougeScore:
    """Clipped n-gram overlap"""
    if n < 1:
        raise ValueError(f"ROUGE-N needs n >= 1, got {n}")
    candidate_grams = ngrams(_fold(candidate), n)
    reference_grams = ngrams(_fold(reference), n)
    overlap = sum((candidate_grams & reference_grams).values())
    return RougeScore.from_counts(overlap, sum(candidate_grams.values()), sum(reference_grams.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    candidate, reference = _fold(candidate), _fold(reference)
    return RougeScore.from_counts(lcs_length(candidate, reference), len(candidate), len(reference))


def score_pair(candidate: Sequence[str], reference: Sequence[str]) -> Dict[str, RougeScore]:
    return {
        'r1': rouge_n(candidate, reference, 1),
        'r2': rouge_n(candidate, reference, 2),
        'rl': rouge_l(candidate, reference),
    }


def evaluate_dataset(pairs: Sequence[Tuple[Sequence[str], Sequence[str]]]) -> Tuple[Dict[str, RougeScore], pd.DataFrame]:
    """
    Score every (candidate, reference) pair; returns the mean score per
    variant and the per-pair table (one row per pair, REPORT_COLUMNS).
    """
    rows = []
    for pair_id, (candidate, reference) in enumerate(pairs):
        row = {'pair_id': str(pair_id)}
        for variant, score in score_pair(candidate, reference).items():
            row[f"{variant}_p"] = score.precision
            row[f"{variant}_r"] = score.recall
            row[f"{variant}_f1"] = score.f1
        rows.append(row)

    table = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    means = {}
    for variant in VARIANTS:
        if rows:
            means[variant] = RougeScore(*(float(table[f"{variant}_{s}"].mean()) for s in ('p', 'r', 'f1')))
        else:
            means[variant] = RougeScore(0.0, 0.0, 0.0)
    logger.info(f"Evaluated {len(rows)} pairs: R-1 F1 {means['r1'].f1:.4f}, "
                f"R-2 F1 {means['r2'].f1:.4f}, R-L F1 {means['rl'].f1:.4f}")
    return means, table


def evaluate_files(candidates: List[List[str]], references: List[List[str]]) -> Tuple[Dict[str, RougeScore], pd.DataFrame]:
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidate summaries but {len(references)} references")
    return evaluate_dataset(list(zip(candidates, references)))


def write_report(path: str, means: Dict[str, RougeScore], table: pd.DataFrame):
    """Per-pair rows followed by a final 'mean' row"""
    mean_row = {'pair_id': 'mean'}
    for variant in VARIANTS:
        mean_row[f"{variant}_p"] = means[variant].precision
        mean_row[f"{variant}_r"] = means[variant].recall
        mean_row[f"{variant}_f1"] = means[variant].f1
    report = pd.concat([table, pd.DataFrame([mean_row], columns=REPORT_COLUMNS)], ignore_index=True)

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    report.to_csv(path, index=False)
    logger.info(f"ROUGE report saved to {path}")
