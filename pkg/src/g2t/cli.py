"""Command-line entry point: ``g2t <subcommand> ...``.

Every subcommand builds all of its outputs in memory and commits them at the
end, so a failure leaves no partial files behind. Outputs whose format has no
room for a header get a ``<file>.meta.json`` sidecar recording the effective
configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from . import __version__
from .checkpoint import Checkpoint, CheckpointError
from .config import TrainConfig, load_config
from .graphs import build_entity_graph, build_levi_graph, dump_entity_graph, dump_levi_graph
from .ie_reward import Extractor, Lexicon, bootstrap_lexicon, reward
from .metrics import evaluate, evaluate_split
from .triples import (DatasetError, MaskedExample, Vocab, build_vocab, identity_mask,
                      load_dataset, load_type_dict, mask_entities, masked_from_record,
                      masked_to_record, normalize_text, unmask_text)

log = logging.getLogger("g2t")


class CliError(Exception):
    pass


class Artifacts:
    """Pending output files, written together on ``commit``."""

    def __init__(self):
        self.files: dict[Path, str] = {}

    def add(self, path: str | Path, text: str) -> None:
        self.files[Path(path)] = text

    def add_meta(self, path: str | Path, command: str, settings: dict) -> None:
        meta = {"g2t_version": __version__, "command": command, "settings": settings}
        self.add(f"{path}.meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def commit(self) -> None:
        staged = []
        try:
            for path, text in self.files.items():
                if not path.parent.is_dir():
                    raise CliError(f"output directory does not exist: {path.parent}")
                fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
                staged.append((tmp, path))
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(text)
        except BaseException:
            for tmp, _ in staged:
                Path(tmp).unlink(missing_ok=True)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)


# --- input helpers -----------------------------------------------------------

def _lines(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def load_examples(path: str) -> list[MaskedExample]:
    """Raw or preprocessed dataset; preprocessed records carry an ``entity_map``."""
    text = Path(path).read_text(encoding="utf-8")
    first = next((ln for ln in text.splitlines() if ln.strip()), None)
    if first is None:
        raise DatasetError(f"{path}: empty dataset")
    try:
        masked = "entity_map" in json.loads(first)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}:1: malformed record ({exc.msg})") from None
    if not masked:
        return [identity_mask(ex) for ex in load_dataset(path)]
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip():
            try:
                out.append(masked_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad masked record ({exc})") from None
    return out


def _config(args) -> TrainConfig:
    try:
        return load_config(args.config, args.set or ())
    except (OSError, ValueError) as exc:
        raise CliError(f"config: {exc}") from None


def _extractor(args, data: Sequence[MaskedExample] | None = None) -> Extractor | None:
    if args.lexicon and args.extractor_cmd:
        raise CliError("give at most one of --lexicon and --extractor-cmd")
    if args.lexicon:
        return Extractor(lexicon=Lexicon.load(args.lexicon))
    if args.extractor_cmd:
        return Extractor(command=args.extractor_cmd)
    if data is not None:
        return None
    raise CliError("need --lexicon or --extractor-cmd")


# --- subcommands -------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = _config(args)
    data = load_dataset(args.input)
    if cfg.masking:
        types = load_type_dict(args.types) if args.types else {}
        masked = [mask_entities(ex, types) for ex in data]
    else:
        masked = [identity_mask(ex) for ex in data]
    out = Artifacts()
    out.add(args.output, "".join(json.dumps(masked_to_record(m), ensure_ascii=False) + "\n" for m in masked))
    settings = {"input": args.input, "types": args.types, "config": cfg.to_dict()}
    out.add_meta(args.output, "preprocess", settings)
    if args.vocab_out:
        vocab = build_vocab(masked, cfg.min_freq)
        out.add(args.vocab_out, "".join(t + "\n" for t in vocab.itos))
    if args.dump_graphs:
        chunks = []
        for i, m in enumerate(masked):
            chunks.append(f"# example {i} entity graph\n" + dump_entity_graph(build_entity_graph(m.triples)))
            chunks.append(f"# example {i} levi graph\n" + dump_levi_graph(build_levi_graph(m.triples)))
        out.add(args.dump_graphs, "".join(chunks))
    out.commit()
    print(f"preprocessed {len(masked)} examples -> {args.output}")
    return 0


def cmd_train(args) -> int:
    from .encoders import load_word_vectors
    from .model import Dims, init_params
    from .training import TrainingDiverged, _seeds, train

    cfg = _config(args)
    train_data = load_examples(args.train)
    valid_data = load_examples(args.valid) if args.valid else []
    vocab = Vocab.load(args.vocab) if args.vocab else build_vocab(train_data, cfg.min_freq)
    params = None
    if args.embeddings:
        init_rng = _seeds(cfg.seed)[0]
        params = init_params(Dims(len(vocab), cfg.embed_dim, cfg.hidden, cfg.gcn_layers), init_rng,
                             cfg.freeze_embeddings)
        load_word_vectors(args.embeddings, vocab.itos, params["embed"].data)
    extractor = _extractor(args, train_data)
    try:
        ckpt, report = train(cfg, train_data, valid_data, vocab, extractor, params)
    except TrainingDiverged as exc:
        raise CliError(str(exc)) from None
    out = Artifacts()
    out.add(args.output, ckpt.dumps())
    if args.report:
        lines = [json.dumps({"config": cfg.to_dict()}, sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in report.records()]
        lines.append(json.dumps({"best_epoch": report.best_epoch}))
        out.add(args.report, "\n".join(lines) + "\n")
    out.commit()
    last = report.epochs[-1]
    print(f"trained {len(report.epochs)} epochs (best {report.best_epoch}, final ce {last.ce_loss:.4f}) "
          f"-> {args.output}")
    return 0


def cmd_generate(args) -> int:
    from .model import generate, graph_inputs
    from .training import tokens_of

    try:
        ckpt = Checkpoint.load(args.checkpoint)
    except CheckpointError as exc:
        raise CliError(f"{args.checkpoint}: {exc}") from None
    vocab = Vocab(tuple(ckpt.vocab))
    max_len = args.max_len or int(ckpt.config.get("max_len", 60))
    data = load_examples(args.input)
    lines = []
    for mex in data:
        toks = tokens_of(vocab, generate(graph_inputs(mex.triples, vocab), ckpt.params, max_len).tokens)
        if not args.keep_masks:
            toks = list(unmask_text(toks, mex.entity_map))
        lines.append(" ".join(toks))
    out = Artifacts()
    out.add(args.output, "".join(ln + "\n" for ln in lines))
    out.add_meta(args.output, "generate", {"checkpoint": args.checkpoint, "input": args.input,
                                           "max_len": max_len, "keep_masks": args.keep_masks,
                                           "config": ckpt.config})
    out.commit()
    print(f"generated {len(lines)} texts -> {args.output}")
    return 0


def cmd_evaluate(args) -> int:
    hyps = [normalize_text(ln) for ln in _lines(args.candidates)]
    if bool(args.dataset) == bool(args.references):
        raise CliError("give exactly one of --dataset or --references")
    if args.dataset:
        data = [m.example for m in load_examples(args.dataset)]
        try:
            report = evaluate_split(hyps, data)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    else:
        ref_files = [[normalize_text(ln) for ln in _lines(p)] for p in args.references]
        for p, refs in zip(args.references, ref_files):
            if len(refs) != len(hyps):
                raise CliError(f"misaligned inputs: {len(hyps)} candidates vs {len(refs)} lines in {p}")
        report = evaluate(hyps, [tuple(r[i] for r in ref_files) for i in range(len(hyps))])
    print(report.to_table())
    if args.output:
        record = {"settings": {"candidates": args.candidates, "dataset": args.dataset,
                               "references": args.references}, **report.to_dict()}
        out = Artifacts()
        out.add(args.output, json.dumps(record, indent=2, sort_keys=True) + "\n")
        out.commit()
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import MICRO_SEED, check_model, check_primitives, format_table

    rows = check_primitives(args.seed, args.eps)
    if not args.primitives_only:
        rows += check_model(MICRO_SEED if args.model_seed is None else args.model_seed, args.eps)
    print(format_table(rows))
    failed = [r for r in rows if not r.ok]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return 1 if failed else 0


def cmd_reward(args) -> int:
    data = load_examples(args.input)
    if args.texts:
        texts = [normalize_text(ln) for ln in _lines(args.texts)]
        if len(texts) != len(data):
            raise CliError(f"misaligned inputs: {len(texts)} texts vs {len(data)} examples")
    else:
        texts = [m.references[0] for m in data]
    ex = _extractor(args)
    extracted = ex.extract_many(texts, [m.triples for m in data])
    records = []
    for i, (m, found) in enumerate(zip(data, extracted)):
        r = reward(found, m.triples)
        kept = sorted(list(t) for t in found)
        records.append({"index": i, "reward": r, "gold": len(m.triples), "extracted": kept})
        print(f"example {i}: reward {r} / {len(m.triples)}")
        for t in kept:
            print(f"  ({t[0]} , {t[1]} , {t[2]})")
    total = sum(rec["reward"] for rec in records)
    print(f"total reward {total} over {len(records)} examples")
    if args.output:
        out = Artifacts()
        out.add(args.output, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))
        out.add_meta(args.output, "reward", {"input": args.input, "texts": args.texts,
                                             "lexicon": args.lexicon, "extractor_cmd": args.extractor_cmd})
        out.commit()
    return 0


def cmd_lexicon_bootstrap(args) -> int:
    lex = bootstrap_lexicon(load_examples(args.input), args.top_k, args.max_span)
    if not lex.triggers:
        raise CliError("no trigger spans found; is the input masked consistently with its references?")
    header = f"# g2t lexicon-bootstrap input={args.input} top_k={args.top_k} max_span={args.max_span}\n"
    body = "".join(f"{rel}\t{t.order}\t{' '.join(t.tokens)}\n"
                   for rel, trigs in lex.triggers.items() for t in trigs)
    out = Artifacts()
    out.add(args.output, header + body)
    out.commit()
    print(f"{sum(len(v) for v in lex.triggers.values())} triggers for {len(lex.triggers)} relations "
          f"-> {args.output}")
    return 0


# --- argument parsing --------------------------------------------------------

def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable; beats --config)")


def _add_extractor(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lexicon", help="trigger lexicon TSV for the builtin extractor")
    p.add_argument("--extractor-cmd", help="external extractor command (text lines in, JSON triple lists out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="g2t", description="Graph-to-text generation from RDF triples.")
    parser.add_argument("--version", action="version", version=f"g2t {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("preprocess", help="normalize and mask a dataset, build a vocabulary")
    p.add_argument("--input", required=True, help="dataset JSONL with 'triples' and 'references'")
    p.add_argument("--output", required=True, help="preprocessed JSONL")
    p.add_argument("--types", help="entity type dictionary (surface TAB type)")
    p.add_argument("--vocab-out", help="write the vocabulary here")
    p.add_argument("--dump-graphs", metavar="PATH", help="write entity and Levi graph edge lists here")
    _add_config(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--train", required=True, help="training data (raw or preprocessed JSONL)")
    p.add_argument("--valid", help="validation data for checkpoint selection")
    p.add_argument("--vocab", help="vocabulary file (default: built from the training data)")
    p.add_argument("--embeddings", help="word-vector text file to initialise the embedding table")
    p.add_argument("--output", required=True, help="checkpoint path")
    p.add_argument("--report", help="write per-epoch records (JSONL) here")
    _add_config(p)
    _add_extractor(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="greedy-decode one text per input example")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="raw or preprocessed JSONL")
    p.add_argument("--output", required=True, help="text file, one line per example")
    p.add_argument("--max-len", type=int, help="decode limit (default: from the checkpoint config)")
    p.add_argument("--keep-masks", action="store_true", help="do not restore entity surfaces")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="corpus BLEU and TER")
    p.add_argument("--candidates", required=True, help="text file, one hypothesis per line")
    p.add_argument("--dataset", help="JSONL whose references are used (adds size buckets)")
    p.add_argument("--references", nargs="+", help="line-aligned reference text files")
    p.add_argument("--output", help="write the report as JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of every primitive and the hybrid loss")
    p.add_argument("--seed", type=int, default=0, help="seed for the primitive shapes")
    p.add_argument("--model-seed", type=int, help="seed for the micro-model")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--primitives-only", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("reward", help="extract triples from texts and count the correct ones")
    p.add_argument("--input", required=True, help="JSONL with the gold triples")
    p.add_argument("--texts", help="line-aligned texts to score (default: each first reference)")
    p.add_argument("--output", help="write per-example records (JSONL) here")
    _add_extractor(p)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("lexicon-bootstrap", help="derive trigger phrases from training references")
    p.add_argument("--input", required=True, help="raw or preprocessed JSONL")
    p.add_argument("--output", required=True, help="lexicon TSV")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--max-span", type=int, default=8)
    p.set_defaults(func=cmd_lexicon_bootstrap)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, DatasetError, CheckpointError, OSError, ValueError) as exc:
        print(f"g2t {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
