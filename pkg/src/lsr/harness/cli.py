"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 failed oracle check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..docmodel import CorpusError, GeneratorSpec, convert_docred, generate_synthetic_corpus, load_corpus, save_corpus
from ..induction import brute_force_marginals, marginals
from ..numerics import Tensor
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .metrics import evaluate, facts_above, gold_facts, pick_threshold, train_fact_keys
from .training import induce_structure, model_from_checkpoint, predict, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3
ORACLE_TOL = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["with-mdp", "full-tokens"])
    p.add_argument("--blocks", type=int, help="number of refinement blocks N")
    p.add_argument("--out", help="output file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lsr", description="Latent structure refinement for document-level relation extraction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train a model; writes a checkpoint")
    _common(p)
    p.add_argument("--train", help="training corpus (overrides config)")
    p.add_argument("--dev", help="dev corpus (overrides config)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--structure", choices=["induced", "uniform"])
    p.add_argument("--report", help="write the best dev MetricsReport here")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("eval", help="score a corpus and write a MetricsReport")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--train-corpus", help="training corpus for Ign F1")
    p.add_argument("--threshold", help="'dev' to tune on this corpus, 'checkpoint', or a number",
                   default="checkpoint")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("predict", help="write scored (doc, head, tail, r, p) lines")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("induce-structure", help="dump per-block marginals for one document")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--doc-id", help="document to dump (default: first)")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("gen-synthetic", help="generate a synthetic bridge-relation corpus")
    _common(p)
    p.add_argument("--documents", type=int, default=100)
    p.add_argument("--sentences", type=int, default=4)
    p.add_argument("--entities", type=int, default=6)
    p.add_argument("--relations", type=int, default=4)
    p.add_argument("--bridge-prob", type=float, default=0.5)
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--sentence-length", type=int, default=8)

    p = sub.add_parser("convert-docred", help="convert DocRED JSON plus a dependency-head sidecar")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--heads", required=True, help="JSON object: title -> per-sentence dep_head arrays")
    p.add_argument("--rel2id", help="JSON relation-name -> id map (written next to --out if absent)")

    p = sub.add_parser("oracle-check", help="compare Matrix-Tree marginals with brute-force enumeration")
    _common(p)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--max-n", type=int, default=6)
    return parser


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    for key in ("seed", "mode", "blocks", "out", "train", "dev", "epochs", "structure"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    return RunConfig.from_dict({**cfg.to_dict(), **over})


def _write_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = cfg.out or "lsr.ckpt"
    ckpt, model = train(cfg)
    save_checkpoint(ckpt, out)
    print(f"checkpoint: {out} (best epoch {ckpt.epoch})")
    if args.report and cfg.dev:
        dev = load_corpus(cfg.dev)
        scored = predict(model, dev)
        theta = ckpt.threshold if ckpt.threshold is not None else pick_threshold(scored, gold_facts(dev))
        rep = evaluate(facts_above(scored, theta), gold_facts(dev), train_fact_keys(load_corpus(cfg.train)), dev,
                       threshold=theta)
        _write_json(rep.to_dict(), args.report)
        print(f"report: {args.report}")
    if not args.no_figures and ckpt.history:
        from .plots import plot_history
        print(f"figure: {plot_history(ckpt.history, args.report or out)}")
    return EXIT_OK


def _load_model(args):
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    if args.mode and args.mode != model.config.mode:
        model.config.mode = args.mode
    return ckpt, model


def cmd_eval(args) -> int:
    ckpt, model = _load_model(args)
    corpus = load_corpus(args.corpus)
    scored = predict(model, corpus, blocks=args.blocks)
    gold = gold_facts(corpus)
    if args.threshold == "dev" or (args.threshold == "checkpoint" and ckpt.threshold is None):
        theta = pick_threshold(scored, gold)
    elif args.threshold == "checkpoint":
        theta = ckpt.threshold
    else:
        try:
            theta = float(args.threshold)
        except ValueError:
            raise UsageError(f"bad --threshold {args.threshold!r}") from None
    keys = train_fact_keys(load_corpus(args.train_corpus)) if args.train_corpus else set()
    rep = evaluate(facts_above(scored, theta), gold, keys, corpus, threshold=theta)
    out = args.out or "metrics.json"
    _write_json(rep.to_dict(), out)
    print(json.dumps({k: v for k, v in rep.to_dict().items() if k != "per_relation"}))
    if not args.no_figures:
        from .plots import plot_metrics
        print(f"figure: {plot_metrics(rep.to_dict(), out)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    _, model = _load_model(args)
    corpus = load_corpus(args.corpus)
    scored = predict(model, corpus, blocks=args.blocks)
    out = args.out or "predictions.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for s in scored:
            fh.write(json.dumps(s._asdict()) + "\n")
    print(f"{len(scored)} scored facts -> {out}")
    return EXIT_OK


def cmd_induce(args) -> int:
    _, model = _load_model(args)
    corpus = load_corpus(args.corpus)
    docs = [d for d in corpus if args.doc_id is None or d.doc_id == args.doc_id]
    if not docs:
        raise CorpusError(f"no document with id {args.doc_id!r}")
    dump = induce_structure(model, docs[0])
    out = args.out or "structure.json"
    _write_json(dump, out)
    print(f"structure dump ({len(dump['blocks'])} blocks) -> {out}")
    if not args.no_figures:
        from .plots import plot_structure
        for p in plot_structure(dump, out):
            print(f"figure: {p}")
    return EXIT_OK


def cmd_gen(args) -> int:
    spec = GeneratorSpec(documents=args.documents, sentences_per_doc=args.sentences, entities_per_doc=args.entities,
                         num_relations=args.relations, bridge_prob=args.bridge_prob, vocab_size=args.vocab_size,
                         sentence_length=args.sentence_length)
    corpus = generate_synthetic_corpus(spec, seed=args.seed if args.seed is not None else 0)
    out = args.out or "synthetic.jsonl"
    save_corpus(corpus, out)
    print(f"{len(corpus)} documents -> {out}")
    return EXIT_OK


def cmd_convert(args) -> int:
    rel2id = json.loads(Path(args.rel2id).read_text()) if args.rel2id else None
    corpus, rel2id = convert_docred(args.input, args.heads, rel2id)
    out = args.out or "docred.jsonl"
    save_corpus(corpus, out)
    if not args.rel2id:
        _write_json(rel2id, Path(out).with_suffix(".rel2id.json"))
    print(f"{len(corpus)} documents, {len(rel2id)} relations -> {out}")
    return EXIT_OK


def oracle_check(seed: int, instances: int = 200, sizes=range(2, 7)) -> float:
    """Largest |marginal - brute force| over random score sets of each size."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in sizes:
        for _ in range(instances):
            s = rng.normal(0.0, 2.0, (n, n))
            sr = rng.normal(0.0, 2.0, n)
            got = marginals(Tensor(s), Tensor(sr))
            P = np.exp(s) * (1.0 - np.eye(n))
            ref = brute_force_marginals(P, np.exp(sr))
            worst = max(worst, float(np.abs(got.A.data - ref.A.data).max()),
                        float(np.abs(got.root.data - ref.root.data).max()))
    return worst


def cmd_oracle(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if not 2 <= args.max_n <= 8:
        raise UsageError("--max-n must be in [2, 8]")
    worst = oracle_check(seed, args.instances, range(2, args.max_n + 1))
    ok = worst < ORACLE_TOL
    print(f"max marginal deviation: {worst:.3e} ({'ok' if ok else 'FAIL'}, tolerance {ORACLE_TOL:g})")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "induce-structure": cmd_induce,
    "gen-synthetic": cmd_gen,
    "convert-docred": cmd_convert,
    "oracle-check": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "lsr: error: a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CorpusError, CheckpointError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"lsr: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
