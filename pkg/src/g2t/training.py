"""Cross-entropy and self-critical training."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tensor
from .checkpoint import Checkpoint
from .config import TrainConfig
from .decoder import prepare_memory, sample_decode, greedy_decode, sequence_log_probs, strip_eos, teacher_forced
from .ie_reward import Extractor, bootstrap_lexicon, reward
from .metrics import bleu
from .model import Dims, Instance, ModelParams, encode_inputs, generate, init_params, make_instances
from .triples import MaskedExample, Vocab, build_vocab

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def cross_entropy_loss(dists: Sequence[Tensor], targets: Sequence[int], mask: Sequence[bool] | None = None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over the unmasked steps."""
    if mask is None:
        keep = list(range(len(targets)))
    else:
        if len(mask) != len(targets):
            raise ValueError("mask and targets differ in length")
        keep = [i for i, m in enumerate(mask) if m]
    if not keep:
        raise ValueError("cross entropy over zero unmasked steps")
    logp = sequence_log_probs([dists[i] for i in keep], [targets[i] for i in keep])
    return ad.scalar_mul(ad.mean(logp), -1.0)


def scst_loss(log_prob_sum: Tensor, r_sample: float, r_baseline: float) -> Tensor:
    """-(R(sample) - R(greedy)) * sum_t log p(sample_t); descent favours better samples."""
    if r_sample < 0 or r_baseline < 0:
        raise ValueError("rewards must be non-negative")
    return ad.scalar_mul(log_prob_sum, -(float(r_sample) - float(r_baseline)))


def hybrid_loss(l_rl: Tensor, l_g: Tensor, gamma: float) -> Tensor:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    return ad.add(ad.scalar_mul(l_rl, gamma), ad.scalar_mul(l_g, 1.0 - gamma))


@dataclass
class EpochRecord:
    epoch: int
    phase: str
    ce_loss: float
    rl_loss: float
    mean_reward: float
    baseline_reward: float
    valid_bleu: float | None


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    wall_time: float = 0.0

    def records(self) -> list[dict]:
        return [asdict(e) for e in self.epochs]

    def __eq__(self, other) -> bool:  # wall time is not part of the result
        return isinstance(other, TrainReport) and self.records() == other.records() \
            and self.best_epoch == other.best_epoch


@dataclass
class StepStats:
    ce: float
    rl: float = 0.0
    reward: float = 0.0
    baseline: float = 0.0


def tokens_of(vocab: Vocab, ids: Sequence[int]) -> list[str]:
    return vocab.decode(strip_eos(ids))


def instance_loss(inst: Instance, params: ModelParams, vocab: Vocab, gamma: float, rl: bool,
                  extractor: Extractor | None, rng: np.random.Generator | None,
                  max_len: int) -> tuple[Tensor, StepStats]:
    """Teacher-forced CE, plus the SCST term when ``rl`` is on and ``gamma > 0``."""
    enc = encode_inputs(inst.inputs, params)
    memory = prepare_memory(enc, params)
    l_g = cross_entropy_loss(teacher_forced(enc, params, inst.target, memory), inst.target)
    if not rl or gamma == 0.0:
        return l_g, StepStats(l_g.item())

    sample = sample_decode(enc, params, max_len, rng)
    greedy = greedy_decode(enc, params, max_len)
    texts = [tokens_of(vocab, sample.tokens), tokens_of(vocab, greedy.tokens)]
    ext_s, ext_g = extractor.extract_many(texts, [inst.gold, inst.gold])
    r_s, r_g = reward(ext_s, inst.gold), reward(ext_g, inst.gold)
    if r_s == r_g:
        l_rl = ad.constant(0.0)
    else:
        dists = teacher_forced(enc, params, sample.tokens, memory)
        l_rl = scst_loss(ad.sum_(sequence_log_probs(dists, sample.tokens)), r_s, r_g)
    return hybrid_loss(l_rl, l_g, gamma), StepStats(l_g.item(), l_rl.item(), r_s, r_g)


def mean_reward(params: ModelParams, instances: Sequence[Instance], vocab: Vocab, extractor: Extractor,
                max_len: int) -> float:
    """Greedy-decode every instance and average the extraction reward."""
    total = 0
    for inst in instances:
        text = tokens_of(vocab, generate(inst.inputs, params, max_len).tokens)
        total += reward(extractor.extract(text, inst.gold), inst.gold)
    return total / max(len(instances), 1)


def corpus_bleu_of(params: ModelParams, data: Sequence[MaskedExample], vocab: Vocab, max_len: int) -> float:
    instances = make_instances(list(data), vocab, all_references=False)
    hyps = [tokens_of(vocab, generate(inst.inputs, params, max_len).tokens) for inst in instances]
    return bleu(hyps, [mex.references for mex in data]).score


def _seeds(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    init_ss, shuffle_ss, sample_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.Generator(np.random.PCG64(init_ss)),
            np.random.Generator(np.random.PCG64(shuffle_ss)),
            np.random.Generator(np.random.PCG64(sample_ss)))


def train(config: TrainConfig, train_data: Sequence[MaskedExample], valid_data: Sequence[MaskedExample] = (),
          vocab: Vocab | None = None, extractor: Extractor | None = None, params: ModelParams | None = None,
          adam: AdamState | None = None, start_epoch: int = 1,
          on_epoch: Callable[[EpochRecord], bool | None] | None = None) -> tuple[Checkpoint, TrainReport]:
    """Epochs up to ``config.ce_epochs`` are CE only; later epochs use the hybrid loss.

    The returned checkpoint holds the parameters with the best validation BLEU
    (the final parameters when no validation data is given). ``on_epoch`` may
    return True to stop after the current epoch.
    """
    if not train_data:
        raise ValueError("empty training set")
    t0 = time.perf_counter()
    vocab = vocab or build_vocab(train_data, config.min_freq)
    init_rng, shuffle_rng, sample_rng = _seeds(config.seed)
    if params is None:
        dims = Dims(len(vocab), config.embed_dim, config.hidden, config.gcn_layers)
        params = init_params(dims, init_rng, config.freeze_embeddings)
    adam = adam or AdamState(lr=config.lr)
    needs_rl = config.gamma > 0 and config.epochs > config.ce_epochs
    if needs_rl and extractor is None:
        extractor = Extractor(lexicon=bootstrap_lexicon(train_data))
    instances = make_instances(list(train_data), vocab, config.all_references)

    report = TrainReport()
    best_bleu = -math.inf
    best = params.copy()
    for epoch in range(start_epoch, config.epochs + 1):
        rl = epoch > config.ce_epochs
        order = shuffle_rng.permutation(len(instances))
        stats: list[StepStats] = []
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            params.zero_grad()
            for i in batch:
                loss, st = instance_loss(instances[i], params, vocab, config.gamma, rl, extractor,
                                         sample_rng, config.max_len)
                if not math.isfinite(loss.item()):
                    raise TrainingDiverged(f"epoch {epoch}, instance {int(i)}: non-finite loss {loss.item()}")
                ad.backward(ad.scalar_mul(loss, 1.0 / len(batch)))
                stats.append(st)
            grads = params.grads()
            ad.clip_grad_norm(grads, config.clip_norm)
            ad.adam_step(params.trainable(), grads, adam)

        valid = None
        if valid_data and (epoch % config.eval_every == 0 or epoch == config.epochs):
            valid = corpus_bleu_of(params, valid_data, vocab, config.max_len)
        rec = EpochRecord(epoch, "hybrid" if rl and config.gamma > 0 else "ce",
                          float(np.mean([s.ce for s in stats])), float(np.mean([s.rl for s in stats])),
                          float(np.mean([s.reward for s in stats])), float(np.mean([s.baseline for s in stats])),
                          valid)
        report.epochs.append(rec)
        log.info("epoch %d %s ce=%.4f rl=%.4f reward=%.3f valid_bleu=%s", epoch, rec.phase, rec.ce_loss,
                 rec.rl_loss, rec.mean_reward, valid)
        if valid_data:
            if valid is not None and valid > best_bleu:
                best_bleu, best, report.best_epoch = valid, params.copy(), epoch
        else:
            best, report.best_epoch = params, epoch
        if on_epoch is not None and on_epoch(rec):
            break

    report.wall_time = time.perf_counter() - t0
    ckpt = Checkpoint(best, list(vocab.itos), config.to_dict(), adam,
                      {"best_epoch": report.best_epoch})
    return ckpt, report
