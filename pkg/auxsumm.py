#!/usr/bin/env python3
"""
auxsumm - two-phase tweet summarizer
Preprocess tweet streams, select tweets, train the key-phrase pointer-generator,
summarize and evaluate, all from one command line.
"""

import os
import sys
import argparse
import logging
from dataclasses import replace

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from config import ConfigError, add_config_arguments, format_config, overrides_from_args, resolve_config  # noqa: E402
from corpus import (chunk_corpus, load_dataset, load_raw_tweets, load_references, load_stopwords,  # noqa: E402
                    pair_references, preprocess_corpus, write_dataset)
from vocab import Vocabulary, build_vocab  # noqa: E402
from keyphrase import make_scorer  # noqa: E402
from extract import FileRanker, LeadRanker, TfidfRanker, rank_tweets, select_until_budget  # noqa: E402
from model import KeyphrasePointerGenerator  # noqa: E402
from checkpoint import load_model  # noqa: E402
from train import Trainer, build_examples, check_training_set  # noqa: E402
from decode import write_sidecar  # noqa: E402
from summarizer import Summarizer  # noqa: E402
from evaluation import evaluate_files, write_report  # noqa: E402

logger = logging.getLogger('auxsumm')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def setup_logging(level: str = 'INFO'):
    os.makedirs('logs', exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler('logs/auxsumm.log'),
            logging.StreamHandler()
        ],
        force=True,
    )


def require_path(key: str, path):
    if not path:
        raise ConfigError(key, path, "required for this command")
    if not os.path.exists(path):
        raise ConfigError(key, path, f"path {path} does not exist")
    return path


def require_value(key: str, value):
    if value is None:
        raise ConfigError(key, value, "required for this command")
    return value


def make_ranker(config, ranker_name: str):
    if config.paths.ranking_file:
        return FileRanker(require_path('ranking_file', config.paths.ranking_file))
    if ranker_name == 'lead':
        return LeadRanker()
    return TfidfRanker(load_stopwords(config.paths.stopwords))


def read_token_lines(path: str):
    """Candidate/reference summaries: a dataset file's references, or one summary per line"""
    if path.endswith('.jsonl'):
        chunks = load_dataset(path)
        missing = [i for i, c in enumerate(chunks) if c.reference_tokens is None]
        if missing:
            raise ValueError(f"{path}: record {missing[0]} has no reference")
        return [c.reference_tokens for c in chunks]
    with open(path, 'r', encoding='utf-8') as f:
        return [line.split() for line in f.read().splitlines()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_preprocess(args, config):
    stopwords = load_stopwords(config.paths.stopwords)
    tweets, ids = preprocess_corpus(load_raw_tweets(require_path('input', args.input)), stopwords)
    if not tweets:
        raise ValueError("no input after preprocessing")

    chunks = chunk_corpus(tweets, config.general.budget, ids)
    if args.references:
        references = load_references(require_path('references', args.references), stopwords)
        chunks = pair_references(chunks, references)
    write_dataset(chunks, require_value('output', args.output))
    print(f"✅ {len(tweets)} tweets -> {len(chunks)} chunks written to {args.output}")
    return EXIT_OK


def cmd_build_vocab(args, config):
    chunks = load_dataset(require_path('dataset', config.paths.dataset))
    vocab = build_vocab(chunks, config.general.max_vocab_size)
    vocab.save(require_value('output', args.output))
    print(f"✅ Vocabulary of {vocab.size} tokens written to {args.output}")
    return EXIT_OK


def cmd_extract(args, config):
    stopwords = load_stopwords(config.paths.stopwords)
    tweets, ids = preprocess_corpus(load_raw_tweets(require_path('input', args.input)), stopwords)
    if not tweets:
        raise ValueError("no input after preprocessing")

    ranked = rank_tweets(tweets, make_ranker(config, args.ranker), ids)
    chunk = select_until_budget(ranked, config.general.budget)
    write_dataset([chunk], require_value('output', args.output))
    print(f"✅ Selected {len(chunk.origin_ids)} of {len(tweets)} tweets "
          f"({len(chunk.source_tokens)} tokens) -> {args.output}")
    return EXIT_OK


def cmd_train(args, config):
    chunks = load_dataset(require_path('dataset', config.paths.dataset))
    vocab = Vocabulary.load(require_path('vocab', config.paths.vocab))
    check_training_set(chunks)
    if args.iterations is not None and args.iterations <= 0:
        raise ConfigError('iterations', args.iterations, "must be positive")

    start_iteration = 0
    accumulators = None
    if args.resume:
        model, metadata, accumulators = load_model(require_path('resume', args.resume), config.model.dtype)
        start_iteration = int(metadata.get('iteration', 0))
        if metadata.get('seed') != config.train.seed:
            logger.warning(f"Resuming with seed {config.train.seed}, checkpoint was trained with {metadata.get('seed')}")
    else:
        model = KeyphrasePointerGenerator.initialize(replace(config.model, vocab_size=vocab.size), config.train.seed)
    if model.config.vocab_size != vocab.size:
        raise ConfigError('vocab', config.paths.vocab,
                          f"vocabulary has {vocab.size} tokens, model expects {model.config.vocab_size}")

    scorer = None
    if model.config.keyphrase_attention:
        scorer = make_scorer(chunks, load_stopwords(config.paths.stopwords), config.paths.keyphrase_file,
                             config.general.keyphrase_top_k, config.general.ignore_keyphrase_scores)

    examples = build_examples(chunks, vocab, model.config, scorer)
    trainer = Trainer(model, examples, config.train, config.paths.checkpoint_dir,
                      start_iteration=start_iteration, accumulators=accumulators)
    history = trainer.train(args.iterations)
    if history:
        print(f"✅ Trained to iteration {trainer.iteration}, last loss {history[-1]['loss']:.4f}")
    else:
        print(f"✅ Nothing to do: already at iteration {trainer.iteration}")
    return EXIT_OK


def cmd_summarize(args, config):
    model, _, _ = load_model(require_path('checkpoint', config.paths.checkpoint))
    vocab = Vocabulary.load(require_path('vocab', config.paths.vocab))
    input_path = require_path('input', args.input)
    stopwords = load_stopwords(config.paths.stopwords)

    if args.raw:
        raw_tweets = load_raw_tweets(input_path)
        summarizer = Summarizer(model, vocab, stopwords, make_ranker(config, args.ranker),
                                decode_config=config.decode, budget=config.general.budget)
        chunks = [summarizer.select(raw_tweets)]
    else:
        chunks = load_dataset(input_path)
        summarizer = None

    scorer = None
    if config.decode.keyphrase_at_decode and model.config.keyphrase_attention:
        scorer = make_scorer(chunks, stopwords, config.paths.keyphrase_file,
                             config.general.keyphrase_top_k, config.general.ignore_keyphrase_scores)
    if summarizer is None:
        summarizer = Summarizer(model, vocab, stopwords, decode_config=config.decode, budget=config.general.budget)
    summarizer.scorer = scorer

    results = summarizer.summarize_dataset(chunks)
    output = require_value('output', args.output)
    directory = os.path.dirname(output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output, 'w', encoding='utf-8', newline='\n') as f:
        for result in results:
            f.write(result.text + '\n')
    if args.sidecar:
        write_sidecar(args.sidecar, results)
    print(f"✅ {len(results)} summaries written to {output}")
    return EXIT_OK


def cmd_evaluate(args, config):
    candidates = read_token_lines(require_path('candidates', args.candidates))
    references = read_token_lines(require_path('references', args.references))
    means, table = evaluate_files(candidates, references)
    write_report(require_value('report', args.report), means, table)

    print(f"{'':8} {'P':>8} {'R':>8} {'F1':>8}")
    for variant, label in (('r1', 'ROUGE-1'), ('r2', 'ROUGE-2'), ('rl', 'ROUGE-L')):
        score = means[variant]
        print(f"{label:8} {score.precision:8.4f} {score.recall:8.4f} {score.f1:8.4f}")
    return EXIT_OK


def cmd_report(args, config):
    from analyzer import TrainingAnalyzer

    metrics = args.metrics or os.path.join(config.paths.checkpoint_dir, 'metrics.csv')
    analyzer = TrainingAnalyzer(require_path('metrics', metrics))
    report_path = analyzer.save_report(os.path.join(args.output_dir, 'training_report.json'))
    plot_path = analyzer.plot_loss_curve(os.path.join(args.output_dir, 'training_loss.png'))
    print(f"✅ Report: {report_path}")
    if plot_path:
        print(f"📈 Loss curve: {plot_path}")
    return EXIT_OK


def cmd_sweep(args, config):
    from analyzer import plot_sweep
    from sweep import SWEEP_AXES, run_sweep

    axis = SWEEP_AXES[args.axis]
    chunks = load_dataset(require_path('dataset', config.paths.dataset))
    eval_chunks = load_dataset(require_path('eval_dataset', args.eval_dataset))
    vocab = Vocabulary.load(require_path('vocab', config.paths.vocab))
    check_training_set(chunks)

    train_config = config.train
    if args.iterations is not None:
        train_config = replace(train_config, max_iterations=args.iterations).validate()
    try:
        values = axis.parse(args.values) if args.values else list(axis.defaults)
    except ValueError as e:
        raise ConfigError('values', args.values, str(e))
    scorer = make_scorer(chunks, load_stopwords(config.paths.stopwords), config.paths.keyphrase_file,
                         config.general.keyphrase_top_k, config.general.ignore_keyphrase_scores)

    table = run_sweep(axis.name, values, chunks, eval_chunks, vocab, scorer, config.model, train_config,
                      config.decode, os.path.join(config.paths.checkpoint_dir, 'sweep'))
    output = args.output or os.path.join('reports', f"{axis.name}_sweep.csv")
    directory = os.path.dirname(output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    table.to_csv(output, index=False)
    plot_sweep(table, axis.name, os.path.splitext(output)[0] + '.png')
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_self_check(args, config):
    import self_check
    return self_check.run_self_check()


COMMANDS = {
    'preprocess': cmd_preprocess,
    'build-vocab': cmd_build_vocab,
    'extract': cmd_extract,
    'train': cmd_train,
    'summarize': cmd_summarize,
    'evaluate': cmd_evaluate,
    'report': cmd_report,
    'sweep': cmd_sweep,
    'self-check': cmd_self_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Flat KEY=value configuration file')
    add_config_arguments(common)

    parser = argparse.ArgumentParser(prog='auxsumm', description='Two-phase abstractive tweet summarizer')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('preprocess', parents=[common], help='Raw tweets -> chunked dataset')
    p.add_argument('--input', '-i', help='Tweets as CSV (id,text[,timestamp]) or JSON lines')
    p.add_argument('--output', '-o', help='Dataset file to write')
    p.add_argument('--references', help='Reference summaries, one per line, paired with chunks in order')

    p = sub.add_parser('build-vocab', parents=[common], help='Dataset -> vocabulary file')
    p.add_argument('--output', '-o', help='Vocabulary file to write')

    p = sub.add_parser('extract', parents=[common], help='Phase-I tweet selection under the token budget')
    p.add_argument('--input', '-i', help='Tweets as CSV or JSON lines')
    p.add_argument('--output', '-o', help='Dataset file holding the selected chunk')
    p.add_argument('--ranker', choices=['tfidf', 'lead'], default='tfidf', help='Ranker when no ranking file is given')

    p = sub.add_parser('train', parents=[common], help='Train the summarization model')
    p.add_argument('--iterations', type=int, help='Number of updates to run in this invocation')
    p.add_argument('--resume', help='Checkpoint to continue training from')

    p = sub.add_parser('summarize', parents=[common], help='Generate summaries with beam search')
    p.add_argument('--input', '-i', help='Dataset file (or raw tweets with --raw)')
    p.add_argument('--output', '-o', help='Summaries, one per line')
    p.add_argument('--sidecar', help='Optional JSON with log probabilities and p_gen traces')
    p.add_argument('--raw', action='store_true', help='Input is a raw tweet file: run Phase I first')
    p.add_argument('--ranker', choices=['tfidf', 'lead'], default='tfidf', help='Phase-I ranker for --raw')

    p = sub.add_parser('evaluate', parents=[common], help='ROUGE-1/2/L of candidates against references')
    p.add_argument('--candidates', help='Candidate summaries, one per line')
    p.add_argument('--references', help='Reference summaries, one per line, or a dataset file')
    p.add_argument('--report', default='reports/rouge.csv', help='CSV report to write')

    p = sub.add_parser('report', parents=[common], help='Training report and loss curve')
    p.add_argument('--metrics', help='Metrics log (default: <checkpoint_dir>/metrics.csv)')
    p.add_argument('--output-dir', default='reports', help='Where to write the report and plot')

    p = sub.add_parser('sweep', parents=[common], help='Train and evaluate across one setting')
    p.add_argument('--axis', choices=['w1', 'fraction', 'batch_size', 'learning_rate', 'iterations'], default='w1',
                   help='Setting to vary: attention weight, training-set share or a training hyperparameter')
    p.add_argument('--values', help='Comma-separated values (default: the built-in grid of the axis)')
    p.add_argument('--eval-dataset', help='Dataset with references used for scoring')
    p.add_argument('--output', '-o', help='Sweep table to write (default reports/<axis>_sweep.csv)')
    p.add_argument('--iterations', type=int, help='Training iterations per run, unless the axis is iterations')

    sub.add_parser('self-check', parents=[common], help='End-to-end smoke run on synthetic data')
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    try:
        config = resolve_config(args.config, overrides_from_args(args))
    except ConfigError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(config.general.log_level)
    print("=" * 60)
    print(f"auxsumm {args.command}")
    print("=" * 60)
    print(format_config(config))
    logger.info(f"Resolved configuration for {args.command}:\n{format_config(config)}")

    try:
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        print(f"❌ {args.command} failed: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
