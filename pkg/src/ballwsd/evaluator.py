"""Evaluation: exact P/R/F1 scoring, synthetic fixtures, experiment runs.

Scoring follows the standard word-sense disambiguation protocol: an
instance without a prediction (no candidate had a ball at the requested
level) costs recall but not precision.  All ratios are computed in exact
rational arithmetic and only rendered to float at the end.

The synthetic fixture builds a small taxonomy whose context windows are
informative of a sense's direct hypernym but, when `senses_per_parent`
is even, deliberately carry no signal about which of two twin senses
under that hypernym is annotated.  Selection at hypernym level is then
cleanly learnable while sense-level selection is capped near one half,
reproducing the characteristic level-0 vs level-1 quality gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .corpus import TrainingRecord, lift_to_level
from .embeddings import EmbeddingTable
from .encoder import (EncoderParams, TrainConfig, embed_records, forward_batch,
                      train)
from .geometry import BallConfiguration, GeometryConfig
from .inventory import (Inventory, SenseId, Taxonomy,
                        check_distinct_hypernym_assumption)
from .selector import Prediction, candidate_set, select_sense


@dataclass(frozen=True)
class EvalReport:
    """Counts plus exactly-derived ratios for one evaluation."""

    attempted: int
    correct: int
    total_gold: int
    skipped: int
    precision: float
    recall: float
    f1: float
    inside_rate: float | None = None

    @classmethod
    def from_counts(cls, correct: int, attempted: int, total_gold: int,
                    inside_count: int | None = None) -> "EvalReport":
        p = Fraction(correct, attempted) if attempted else Fraction(0)
        r = Fraction(correct, total_gold) if total_gold else Fraction(0)
        f1 = 2 * p * r / (p + r) if (p + r) else Fraction(0)
        inside = None
        if inside_count is not None:
            inside = float(Fraction(inside_count, attempted)) if attempted else 0.0
        return cls(
            attempted=attempted,
            correct=correct,
            total_gold=total_gold,
            skipped=total_gold - attempted,
            precision=float(p),
            recall=float(r),
            f1=float(f1),
            inside_rate=inside,
        )

    def render(self) -> str:
        inside = "-" if self.inside_rate is None else f"{self.inside_rate:.4f}"
        return (f"P={self.precision:.4f} R={self.recall:.4f} F1={self.f1:.4f} "
                f"attempted={self.attempted} correct={self.correct} "
                f"total={self.total_gold} skipped={self.skipped} inside={inside}")


def score(predicted: dict[str, SenseId], gold: dict[str, SenseId],
          inside: dict[str, bool] | None = None) -> EvalReport:
    """Score predictions against gold labels by instance id.

    Every predicted id must be a gold id; gold ids without a prediction
    count as skipped (recall denominator only).
    """
    extra = set(predicted) - set(gold)
    if extra:
        raise ValueError(f"predictions for unknown instance ids: {sorted(extra)[:5]}")
    correct = sum(1 for iid, p in predicted.items() if p == gold[iid])
    inside_count = None
    if inside is not None:
        inside_count = sum(1 for iid in predicted if inside.get(iid, False))
    return EvalReport.from_counts(correct, len(predicted), len(gold), inside_count)


# ---------------------------------------------------------------------------
# report files

def save_reports(reports: dict[int, EvalReport], path, dataset: str = "eval") -> None:
    cols = ("dataset", "level", "precision", "recall", "f1", "attempted",
            "correct", "total_gold", "skipped", "inside_rate")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#" + "\t".join(cols) + "\n")
        for level in sorted(reports):
            r = reports[level]
            inside = "-" if r.inside_rate is None else "%.17g" % r.inside_rate
            fh.write("\t".join([
                dataset, str(level), "%.17g" % r.precision, "%.17g" % r.recall,
                "%.17g" % r.f1, str(r.attempted), str(r.correct),
                str(r.total_gold), str(r.skipped), inside,
            ]) + "\n")


# ---------------------------------------------------------------------------
# synthetic fixture

@dataclass
class SyntheticFixture:
    inventory: Inventory
    table: EmbeddingTable
    records: list[TrainingRecord]     # grouped by leaf sense, in order
    leaves: list[SenseId]
    tops: list[SenseId]
    records_per_sense: int

    @property
    def taxonomy(self) -> Taxonomy:
        return self.inventory.taxonomy


def make_synthetic_fixture(seed: int = 0, n_top: int = 4, senses_per_parent: int = 3,
                           vocab_size: int = 200, records_per_sense: int = 100,
                           chain_levels: int = 0, embedding_dim: int = 32,
                           sentence_len: int = 9, signature_prob: float = 0.75,
                           noise: float = 0.6) -> SyntheticFixture:
    """Build a taxonomy, embeddings and an annotated corpus in one piece.

    The taxonomy has one root, `n_top` top hypernyms (behind a chain of
    `chain_levels` single-child nodes each when requested) and
    `senses_per_parent` leaf senses under every top.  Ambiguous words
    supply the leaves: with even `senses_per_parent` a word's senses
    come in twin pairs sharing a direct hypernym, with odd counts every
    sense of a word sits under a different top.

    Context tokens are drawn from a per-top signature vocabulary with
    probability `signature_prob` (fillers otherwise), so the window mean
    identifies the top, never the twin.  Word embeddings are
    orthogonalized against the taxonomy scaffold's embeddings to keep
    static word-to-anchor similarity out of the signal.
    """
    if n_top < 2 or senses_per_parent < 1:
        raise ValueError("need n_top >= 2 and senses_per_parent >= 1")
    if embedding_dim < n_top + chain_levels * n_top + 2:
        raise ValueError("embedding_dim too small to orthogonalize the scaffold")
    rng = np.random.default_rng(seed)

    def unit(v):
        return v / np.linalg.norm(v)

    root = SenseId("entity", "n", 1)
    tops = [SenseId(f"domain{t}", "n", 1) for t in range(n_top)]
    parent: dict[SenseId, SenseId | None] = {root: None}
    vectors: dict[str, np.ndarray] = {"entity": unit(rng.standard_normal(embedding_dim))}

    # orthonormal top directions
    raw = rng.standard_normal((n_top, embedding_dim))
    q, _ = np.linalg.qr(raw.T)
    top_vec = {t: q[:, t].copy() for t in range(n_top)}

    scaffold = [vectors["entity"]]
    for t, top in enumerate(tops):
        vectors[top.lemma] = top_vec[t]
        scaffold.append(top_vec[t])
        above = root
        for j in range(chain_levels, 0, -1):
            node = SenseId(f"domain{t}up{j}", "n", 1)
            parent[node] = above
            vec = unit(top_vec[t] + 0.15 * rng.standard_normal(embedding_dim))
            vectors[node.lemma] = vec
            scaffold.append(vec)
            above = node
        parent[top] = above

    # leaf senses from ambiguous words
    n_words = n_top if senses_per_parent % 2 == 0 else senses_per_parent
    word_of: dict[tuple[int, int], int] = {}
    for t in range(n_top):
        for s in range(senses_per_parent):
            if senses_per_parent % 2 == 0:
                word_of[(t, s)] = (t + s // 2) % n_words
            else:
                word_of[(t, s)] = (t + s) % n_words
    sense_index: dict[tuple[int, int], int] = {}
    for j in range(n_words):
        slots = sorted(k for k, w in word_of.items() if w == j)
        for pos, k in enumerate(slots, start=1):
            sense_index[k] = pos
    leaves = []
    for t in range(n_top):
        for s in range(senses_per_parent):
            leaf = SenseId(f"word{word_of[(t, s)]}", "n", sense_index[(t, s)])
            parent[leaf] = tops[t]
            leaves.append(leaf)

    # word embeddings, orthogonal to the scaffold
    basis = np.stack(scaffold)
    for j in range(n_words):
        v = rng.standard_normal(embedding_dim)
        v -= basis.T @ np.linalg.lstsq(basis.T, v, rcond=None)[0]
        vectors[f"word{j}"] = unit(v)

    # context vocabulary: per-top signatures plus fillers
    sig_size = vocab_size // (n_top + 1)
    if sig_size < 1:
        raise ValueError("vocab_size too small for per-top signatures")
    signatures: list[list[str]] = []
    for t in range(n_top):
        words = []
        for i in range(sig_size):
            w = f"sig{t}_{i}"
            vectors[w] = unit(top_vec[t] + noise * rng.standard_normal(embedding_dim))
            words.append(w)
        signatures.append(words)
    fillers = []
    for i in range(vocab_size - n_top * sig_size):
        w = f"fill{i}"
        vectors[w] = unit(rng.standard_normal(embedding_dim))
        fillers.append(w)

    records: list[TrainingRecord] = []
    for t in range(n_top):
        for s in range(senses_per_parent):
            leaf = leaves[t * senses_per_parent + s]
            for _ in range(records_per_sense):
                pos = int(rng.integers(0, sentence_len))
                tokens = []
                for slot in range(sentence_len):
                    if slot == pos:
                        tokens.append(leaf.lemma)
                    elif rng.random() < signature_prob:
                        tokens.append(signatures[t][int(rng.integers(0, sig_size))])
                    else:
                        tokens.append(fillers[int(rng.integers(0, len(fillers)))])
                records.append(TrainingRecord(leaf, leaf, tuple(tokens), (pos,)))

    inventory = Inventory(taxonomy=Taxonomy(parent))
    return SyntheticFixture(
        inventory=inventory,
        table=EmbeddingTable(vectors),
        records=records,
        leaves=leaves,
        tops=tops,
        records_per_sense=records_per_sense,
    )


def split_records(records, n_train: int, n_test: int):
    """Per original sense: first n_train records to train, last n_test to
    test.  Growing n_train never changes the test set.
    """
    by_sense: dict[SenseId, list[TrainingRecord]] = {}
    for r in records:
        by_sense.setdefault(r.original, []).append(r)
    train_set, test_set = [], []
    for sense in sorted(by_sense):
        group = by_sense[sense]
        if n_train + n_test > len(group):
            raise ValueError(f"{sense}: {len(group)} records cannot cover "
                             f"{n_train} train + {n_test} test")
        train_set.extend(group[:n_train])
        test_set.extend(group[len(group) - n_test:])
    return train_set, test_set


# ---------------------------------------------------------------------------
# experiments

@dataclass
class ExperimentEnv:
    """Everything a run needs: data, geometry, and embeddings."""

    inventory: Inventory
    table: EmbeddingTable
    balls: BallConfiguration
    train_records: list[TrainingRecord]   # level-0 annotations
    test_records: list[TrainingRecord]    # level-0 annotations
    geometry: GeometryConfig = field(default_factory=GeometryConfig)


@dataclass
class ExperimentSpec:
    """What to train and where to evaluate."""

    train_level: int = 0
    eval_levels: tuple[int, ...] = (0, 1)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    name: str = "experiment"


@dataclass
class ExperimentResult:
    name: str
    train_level: int
    reports: dict[int, EvalReport]
    curve: list[tuple[int, float]]
    collisions: list[tuple[SenseId, SenseId]]
    predictions: dict[int, dict[str, Prediction]]
    params: EncoderParams

    def render(self) -> str:
        lines = [f"{self.name}: trained at level {self.train_level}"]
        for level in sorted(self.reports):
            lines.append(f"  level {level}: {self.reports[level].render()}")
        if self.collisions:
            lines.append(f"  shared-hypernym sense pairs: {len(self.collisions)}")
            for a, b in self.collisions[:10]:
                lines.append(f"    {a} / {b}")
        return "\n".join(lines)


def predict_records(params: EncoderParams, records, level: int,
                    inventory: Inventory, table: EmbeddingTable,
                    balls: BallConfiguration, geometry: GeometryConfig,
                    window_k: int) -> tuple[EvalReport, dict[str, Prediction]]:
    """Predict already-lifted records at one level and score them.

    Gold is each record's target; a record whose word has no candidate
    with a ball at this level goes unattempted.
    """
    records = list(records)
    gold: dict[str, SenseId] = {}
    predicted: dict[str, SenseId] = {}
    inside: dict[str, bool] = {}
    predictions: dict[str, Prediction] = {}
    if not records:
        return EvalReport.from_counts(0, 0, 0, 0), {}
    T, C = embed_records(records, table, window_k)
    V = forward_batch(params, T, C)
    cand_cache: dict[tuple[str, str], list] = {}
    for i, rec in enumerate(records):
        iid = f"l{level}.{i:06d}"
        gold[iid] = rec.target
        word = rec.original.word
        if word not in cand_cache:
            cand_cache[word] = candidate_set(word[0], word[1], level,
                                             inventory, balls)
        candidates = cand_cache[word]
        if not candidates:
            continue
        pred = select_sense(V[i], candidates, geometry)
        anchor = next(c.anchor for c in candidates if c.sense == pred.chosen)
        predicted[iid] = anchor
        inside[iid] = pred.inside_anchor_ball
        predictions[iid] = pred
    return score(predicted, gold, inside), predictions


def evaluate_level(params: EncoderParams, level: int, env: ExperimentEnv,
                   window_k: int) -> tuple[EvalReport, dict[str, Prediction]]:
    """Lift the test records to one level, predict, and score."""
    lifted = lift_to_level(env.test_records, env.inventory.taxonomy, level,
                           env.balls)
    return predict_records(params, lifted, level, env.inventory, env.table,
                           env.balls, env.geometry, window_k)


def run_experiment(spec: ExperimentSpec, env: ExperimentEnv) -> ExperimentResult:
    """Train at spec.train_level, then evaluate at every requested level.

    A sense pair sharing its direct hypernym cannot be split by any
    anchor-based selector; the full collision list rides along in the
    result so reports can surface it.
    """
    tax = env.inventory.taxonomy
    train_set = lift_to_level(env.train_records, tax, spec.train_level, env.balls)
    if not train_set:
        raise ValueError(f"no training records survive lifting to level {spec.train_level}")
    outcome = train(train_set, env.table, env.balls, spec.train_config)
    reports: dict[int, EvalReport] = {}
    predictions: dict[int, dict[str, Prediction]] = {}
    for level in spec.eval_levels:
        reports[level], predictions[level] = evaluate_level(
            outcome.params, level, env, spec.train_config.window_k)
    return ExperimentResult(
        name=spec.name,
        train_level=spec.train_level,
        reports=reports,
        curve=outcome.curve,
        collisions=check_distinct_hypernym_assumption(env.inventory),
        predictions=predictions,
        params=outcome.params,
    )
