"""Synthetic event logs from a ground-truth HMM, plus recovery scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np
from scipy.optimize import linear_sum_assignment

from .eventlog import Event, EventLog, Vocabulary, build_log
from .hmm import FixedLength, GeometricLength, HmmModel, length_law_from_dict, model_from_dict, model_to_dict, sample

BASE_TIME = datetime(2013, 1, 1, 0, 0)


@dataclass(frozen=True)
class GroundTruthSpec:
    model: HmmModel
    labels: tuple[str, ...]
    n_cases: int
    length_law: FixedLength | GeometricLength
    seed: int = 0

    def __post_init__(self):
        if len(self.labels) != self.model.n_symbols:
            raise ValueError(
                f"{len(self.labels)} labels given for {self.model.n_symbols} symbols"
            )
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("activity labels must be unique")
        if self.n_cases < 1:
            raise ValueError("n_cases must be >= 1")

    def to_dict(self) -> dict:
        return {
            "model": model_to_dict(self.model),
            "labels": list(self.labels),
            "n_cases": self.n_cases,
            "length": self.length_law.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruthSpec":
        model, _ = model_from_dict(doc["model"])
        law = doc["length"]
        law = FixedLength(int(law)) if isinstance(law, int) else length_law_from_dict(law)
        return cls(model, tuple(doc["labels"]), int(doc["n_cases"]), law, int(doc.get("seed", 0)))

    @classmethod
    def load(cls, path) -> "GroundTruthSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def generate(spec: GroundTruthSpec) -> tuple[EventLog, list[list[int]], list[list[int]]]:
    """Sampled log together with the symbol sequences and hidden state paths."""
    seqs, states = sample(spec.model, spec.n_cases, spec.length_law, spec.seed, return_states=True)
    width = max(6, len(str(spec.n_cases)))
    events = []
    for k, seq in enumerate(seqs, start=1):
        cid = f"C{k:0{width}d}"
        for t, sym in enumerate(seq):
            events.append(Event(cid, BASE_TIME + timedelta(minutes=t), spec.labels[sym], "00"))
    return build_log(events, {"synthetic": True, "seed": spec.seed}), seqs, states


def generate_log(spec: GroundTruthSpec) -> EventLog:
    return generate(spec)[0]


def align_emissions(learned: HmmModel, vocabulary: Vocabulary, labels) -> np.ndarray:
    """Learned emission matrix re-indexed into the ground truth's label order.

    Labels that never occurred in the log get zero probability.
    """
    out = np.zeros((learned.n_states, len(labels)))
    for k, label in enumerate(labels):
        if label in vocabulary:
            out[:, k] = learned.emit[:, vocabulary.id_of(label)]
    return out


def match_states(true_emit: np.ndarray, learned_emit: np.ndarray) -> np.ndarray:
    """Permutation ``perm`` with learned state ``perm[i]`` playing true state i,
    minimising the summed L1 distance between emission rows."""
    cost = np.abs(true_emit[:, None, :] - learned_emit[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=np.int64)
    perm[rows] = cols
    return perm


def recovery_errors(truth: HmmModel, learned: HmmModel, learned_emit: np.ndarray | None = None) -> dict:
    """Per-row L1 errors of trans and emit after optimal state matching.

    ``learned_emit`` overrides the learned emission matrix when its columns
    need re-indexing into the truth's symbol order (see :func:`align_emissions`).
    """
    if truth.n_states != learned.n_states:
        raise ValueError("state counts differ")
    emit = learned.emit if learned_emit is None else learned_emit
    perm = match_states(truth.emit, emit)
    t_err = np.abs(truth.trans - learned.trans[np.ix_(perm, perm)]).sum(axis=1)
    e_err = np.abs(truth.emit - emit[perm]).sum(axis=1)
    return {
        "permutation": perm.tolist(),
        "trans_row_l1": t_err.tolist(),
        "emit_row_l1": e_err.tolist(),
        "max_trans_row_l1": float(t_err.max()),
        "max_emit_row_l1": float(e_err.max()),
    }


def structured_spec(
    labels,
    n_states: int,
    n_cases: int,
    length_law,
    seed: int = 0,
    leak: float = 0.02,
    successors: int = 2,
) -> GroundTruthSpec:
    """Random ground truth where each state emits mostly from its own block of labels.

    Labels are dealt round-robin into ``n_states`` blocks; a state puts
    ``1 - leak`` of its emission mass on its block (Dirichlet weights) and
    spreads ``leak`` over the rest. Each state has a self-transition plus
    ``successors`` strong successors; remaining transition mass is spread thin.
    """
    labels = tuple(labels)
    m = len(labels)
    if n_states > m:
        raise ValueError("need at least one label per state")
    rng = np.random.default_rng(seed)
    emit = np.full((n_states, m), leak / max(m - 1, 1))
    for i in range(n_states):
        block = np.arange(i, m, n_states)
        emit[i, block] = 0.0
        emit[i, block] = (1.0 - emit[i].sum()) * rng.dirichlet(np.ones(block.size))
    trans = np.full((n_states, n_states), 0.01)
    for i in range(n_states):
        others = [j for j in range(n_states) if j != i]
        trans[i, i] += 0.3
        if not others:
            continue
        picks = rng.choice(others, size=min(successors, len(others)), replace=False)
        trans[i, picks] += rng.dirichlet(np.ones(len(picks))) * 0.6
    trans /= trans.sum(axis=1, keepdims=True)
    pi = rng.dirichlet(np.ones(n_states))
    if isinstance(length_law, int):
        length_law = FixedLength(length_law)
    return GroundTruthSpec(HmmModel(pi, trans, emit), labels, n_cases, length_law, seed)
