"""Discrete-emission hidden Markov models.

Representation, scaled forward/backward, Viterbi decoding, K-Means
initialisation, multi-sequence Baum-Welch and sampling. Hidden states play
the role of user strategies; symbols are encoded activities.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .eventlog import Vocabulary

STOCHASTIC_TOL = 1e-6
BW_FLOOR = 1e-12
KMEANS_ALPHA = 1e-3


class HmmError(ValueError):
    pass


def _as_stochastic(name: str, arr, ndim: int, tol: float) -> np.ndarray:
    a = np.array(arr, dtype=np.float64)
    if a.ndim != ndim:
        raise HmmError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise HmmError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise HmmError(f"{name} has non-finite entries")
    if a.min() < -tol or a.max() > 1 + tol:
        raise HmmError(f"{name} has entries outside [0, 1]")
    sums = a.sum(axis=-1)
    bad = np.flatnonzero(np.abs(np.atleast_1d(sums) - 1.0) > tol)
    if bad.size:
        where = "" if ndim == 1 else f" row {int(bad[0])}"
        raise HmmError(f"{name}{where} sums to {float(np.atleast_1d(sums)[bad[0]]):.12g}, not 1")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HmmModel:
    """HMM parameters: initial vector ``pi`` (N), transitions ``trans`` (N x N,
    row i is P(next state | state i)) and emissions ``emit`` (N x M)."""

    pi: np.ndarray
    trans: np.ndarray
    emit: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", _as_stochastic("pi", self.pi, 1, STOCHASTIC_TOL))
        object.__setattr__(self, "trans", _as_stochastic("trans", self.trans, 2, STOCHASTIC_TOL))
        object.__setattr__(self, "emit", _as_stochastic("emit", self.emit, 2, STOCHASTIC_TOL))
        n = self.pi.shape[0]
        if self.trans.shape != (n, n):
            raise HmmError(f"trans shape {self.trans.shape} does not match {n} states")
        if self.emit.shape[0] != n:
            raise HmmError(f"emit has {self.emit.shape[0]} rows for {n} states")

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.emit.shape[1]

    def permuted(self, order: Sequence[int]) -> "HmmModel":
        """Relabel states so that new state k is old state ``order[k]``."""
        order = np.asarray(order)
        return HmmModel(self.pi[order], self.trans[np.ix_(order, order)], self.emit[order])

    def __eq__(self, other) -> bool:
        if not isinstance(other, HmmModel):
            return NotImplemented
        return (
            np.array_equal(self.pi, other.pi)
            and np.array_equal(self.trans, other.trans)
            and np.array_equal(self.emit, other.emit)
        )

    def __repr__(self) -> str:
        return f"HmmModel(n_states={self.n_states}, n_symbols={self.n_symbols})"


@dataclass
class TrainingReport:
    iterations_run: int = 0
    log_likelihood_per_iteration: list[float] = field(default_factory=list)
    converged_early: bool = False
    # states that received no expected occupancy in some iteration
    degenerate_states: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations_run": self.iterations_run,
            "log_likelihood_per_iteration": list(self.log_likelihood_per_iteration),
            "converged_early": self.converged_early,
            "degenerate_states": list(self.degenerate_states),
        }


def init_uniform(n_states: int, n_symbols: int) -> HmmModel:
    if n_states < 1 or n_symbols < 1:
        raise HmmError("n_states and n_symbols must be >= 1")
    return HmmModel(
        np.full(n_states, 1.0 / n_states),
        np.full((n_states, n_states), 1.0 / n_states),
        np.full((n_states, n_symbols), 1.0 / n_symbols),
    )


# ---------------------------------------------------------------------------
# sequence plumbing


def _check_sequence(seq, n_symbols: int) -> np.ndarray:
    obs = np.asarray(seq, dtype=np.int64)
    if obs.ndim != 1 or obs.size == 0:
        raise HmmError("sequence must be a non-empty 1-D list of symbols")
    bad = np.flatnonzero((obs < 0) | (obs >= n_symbols))
    if bad.size:
        pos = int(bad[0])
        raise HmmError(f"symbol {int(obs[pos])} at position {pos} is outside [0, {n_symbols})")
    return obs


def _pack(sequences, n_symbols: int) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate sequences into one array plus offsets."""
    if len(sequences) == 0:
        raise HmmError("no sequences given")
    arrays = []
    for k, seq in enumerate(sequences):
        try:
            arrays.append(_check_sequence(seq, n_symbols))
        except HmmError as exc:
            raise HmmError(f"sequence {k}: {exc}") from None
    offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([a.size for a in arrays])
    return np.concatenate(arrays), offsets


# ---------------------------------------------------------------------------
# numba kernels; scaled (Rabiner) recursions


@njit(cache=True)
def _forward_kernel(pi, trans, emit, obs):
    T = obs.shape[0]
    N = pi.shape[0]
    alpha = np.zeros((T, N))
    scale = np.zeros(T)
    c = 0.0
    for i in range(N):
        alpha[0, i] = pi[i] * emit[i, obs[0]]
        c += alpha[0, i]
    if c == 0.0:
        return alpha, scale
    for i in range(N):
        alpha[0, i] /= c
    scale[0] = c
    for t in range(1, T):
        c = 0.0
        o = obs[t]
        for j in range(N):
            s = 0.0
            for i in range(N):
                s += alpha[t - 1, i] * trans[i, j]
            alpha[t, j] = s * emit[j, o]
            c += alpha[t, j]
        if c == 0.0:
            return alpha, scale
        for j in range(N):
            alpha[t, j] /= c
        scale[t] = c
    return alpha, scale


@njit(cache=True)
def _backward_kernel(trans, emit, obs, scale):
    T = obs.shape[0]
    N = trans.shape[0]
    beta = np.zeros((T, N))
    for i in range(N):
        beta[T - 1, i] = 1.0
    for t in range(T - 2, -1, -1):
        o = obs[t + 1]
        c = scale[t + 1]
        for i in range(N):
            s = 0.0
            for j in range(N):
                s += trans[i, j] * emit[j, o] * beta[t + 1, j]
            beta[t, i] = s / c
    return beta


@njit(cache=True)
def _accumulate(pi, trans, emit, obs, offsets):
    """E-step over all sequences in fixed order; returns expected counts."""
    N = pi.shape[0]
    M = emit.shape[1]
    pi_acc = np.zeros(N)
    trans_acc = np.zeros((N, N))
    emit_acc = np.zeros((N, M))
    occupancy = np.zeros(N)
    total_ll = 0.0
    for s in range(offsets.shape[0] - 1):
        o = obs[offsets[s]:offsets[s + 1]]
        T = o.shape[0]
        alpha, scale = _forward_kernel(pi, trans, emit, o)
        if scale[T - 1] == 0.0:
            total_ll = -np.inf
            continue
        beta = _backward_kernel(trans, emit, o, scale)
        for t in range(T):
            total_ll += np.log(scale[t])
        for i in range(N):
            pi_acc[i] += alpha[0, i] * beta[0, i]
        for t in range(T):
            for i in range(N):
                g = alpha[t, i] * beta[t, i]
                emit_acc[i, o[t]] += g
                occupancy[i] += g
        for t in range(T - 1):
            on = o[t + 1]
            c = scale[t + 1]
            for i in range(N):
                a = alpha[t, i] / c
                for j in range(N):
                    trans_acc[i, j] += a * trans[i, j] * emit[j, on] * beta[t + 1, j]
    return total_ll, pi_acc, trans_acc, emit_acc, occupancy


# ---------------------------------------------------------------------------
# evaluation and decoding


def forward_scaled(model: HmmModel, sequence) -> tuple[float, np.ndarray, np.ndarray]:
    """Scaled forward pass. Returns (log-likelihood, normalised alphas, scale factors).

    Row t of the alpha table sums to one; the product of the scale factors is
    the sequence likelihood. An impossible sequence yields ``-inf``.
    """
    obs = _check_sequence(sequence, model.n_symbols)
    alpha, scale = _forward_kernel(model.pi, model.trans, model.emit, obs)
    if np.any(scale == 0.0):
        return -math.inf, alpha, scale
    return float(np.log(scale).sum()), alpha, scale


def forward(model: HmmModel, sequence) -> tuple[float, np.ndarray]:
    loglik, alpha, _ = forward_scaled(model, sequence)
    return loglik, alpha


def backward(model: HmmModel, sequence) -> np.ndarray:
    """Scaled backward table, consistent with :func:`forward`: for every t,
    ``(alpha[t] * beta[t]).sum() == 1`` so the likelihood is recovered from the
    forward scale factors."""
    loglik, alpha, scale = forward_scaled(model, sequence)
    if loglik == -math.inf:
        raise HmmError("sequence has zero probability under the model")
    obs = np.asarray(sequence, dtype=np.int64)
    return _backward_kernel(model.trans, model.emit, obs, scale)


def posteriors(model: HmmModel, sequence) -> np.ndarray:
    """Per-step posterior state probabilities gamma[t, i]."""
    _, alpha, _ = forward_scaled(model, sequence)
    beta = backward(model, sequence)
    return alpha * beta


def log_likelihood(model: HmmModel, sequences) -> float:
    obs, offsets = _pack(sequences, model.n_symbols)
    ll, *_ = _accumulate(model.pi, model.trans, model.emit, obs, offsets)
    return float(ll)


VITERBI_TIE_RTOL = 1e-12


def _first_near_max(values: np.ndarray, best) -> np.ndarray:
    # paths that tie mathematically can differ by an ulp depending on summation
    # order, so "tied" means within a relative tolerance of the maximum
    slack = VITERBI_TIE_RTOL * np.maximum(1.0, np.abs(best))
    with np.errstate(invalid="ignore"):
        return np.argmax(values >= best - slack, axis=0)


def viterbi(model: HmmModel, sequence) -> tuple[list[int], float]:
    """Most probable state path and its log joint probability.

    Ties resolve to the lowest state index, both for the final state and at
    every backtracking step. Log scores within a relative 1e-12 of the best
    count as tied.
    """
    obs = _check_sequence(sequence, model.n_symbols)
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.pi)
        log_t = np.log(model.trans)
        log_e = np.log(model.emit)
    T = obs.size
    back = np.zeros((T, model.n_states), dtype=np.int64)
    delta = log_pi + log_e[:, obs[0]]
    for t in range(1, T):
        cand = delta[:, None] + log_t
        best = cand.max(axis=0)
        back[t] = _first_near_max(cand, best)
        delta = best + log_e[:, obs[t]]
    best = delta.max()
    state = int(_first_near_max(delta, best))
    best = float(best)
    path = [state]
    for t in range(T - 1, 0, -1):
        state = int(back[t, state])
        path.append(state)
    path.reverse()
    return path, best


# ---------------------------------------------------------------------------
# learning


def _event_features(sequences, n_symbols: int, mode: str, position_weight: float,
                    symbol_weight: float, context_radius: int) -> np.ndarray:
    obs, offsets = _pack(sequences, n_symbols)
    n = obs.size
    onehot = np.zeros((n, n_symbols))
    onehot[np.arange(n), obs] = 1.0
    if mode == "onehot":
        return onehot
    lengths = np.diff(offsets)
    case_len = np.repeat(lengths, lengths)
    pos = np.arange(n) - np.repeat(offsets[:-1], lengths)
    position = (pos / np.maximum(case_len - 1, 1))[:, None] * position_weight
    if mode == "positional":
        return np.hstack([onehot, position])
    if mode != "context":
        raise HmmError(f"unknown k-means feature mode {mode!r}")
    # mean one-hot of in-case neighbours within the radius
    ctx = np.zeros_like(onehot)
    cnt = np.zeros(n)
    for d in range(1, context_radius + 1):
        back = np.flatnonzero(pos >= d)
        ctx[back] += onehot[back - d]
        cnt[back] += 1
        ahead = np.flatnonzero(pos < case_len - d)
        ctx[ahead] += onehot[ahead + d]
        cnt[ahead] += 1
    ctx /= np.maximum(cnt, 1)[:, None]
    return np.hstack([symbol_weight * onehot, ctx, position])


def kmeans_init(
    sequences,
    n_states: int,
    seed: int = 0,
    *,
    n_symbols: int | None = None,
    mode: str = "context",
    position_weight: float = 0.1,
    symbol_weight: float = 0.5,
    context_radius: int = 1,
    smoothing: float = KMEANS_ALPHA,
    n_init: int = 10,
) -> HmmModel:
    """Initial model from a hard K-Means clustering of individual events.

    In the default ``"context"`` mode an event's feature vector is its
    one-hot symbol scaled by ``symbol_weight``, the mean one-hot of its
    in-case neighbours within ``context_radius`` and its normalised position
    scaled by ``position_weight``. Neighbours dominate so that clusters follow
    runs of a hidden state rather than partitioning the alphabet.
    ``"positional"`` uses one-hot plus position, ``"onehot"`` the symbol alone.
    Cluster labels act as hidden states; pi/trans/emit come from counts
    smoothed by ``smoothing``.
    """
    from sklearn.cluster import KMeans

    if n_symbols is None:
        n_symbols = 1 + max((max(s) for s in sequences if len(s)), default=-1)
    if n_symbols < 1:
        raise HmmError("no observations to cluster")
    obs, offsets = _pack(sequences, n_symbols)
    if n_states < 1 or n_states > obs.size:
        raise HmmError(f"n_states={n_states} must lie in [1, {obs.size}] (observation count)")

    if n_states == 1:
        labels = np.zeros(obs.size, dtype=np.int64)
    else:
        feats = _event_features(
            sequences, n_symbols, mode, position_weight, symbol_weight, context_radius
        )
        km = KMeans(n_clusters=n_states, n_init=n_init, random_state=seed)
        with warnings.catch_warnings():
            # fewer distinct points than clusters leaves some states empty; smoothing covers it
            warnings.simplefilter("ignore")
            raw = km.fit_predict(feats)
        # canonical state order: descending cluster size, ties by first occurrence
        sizes = np.bincount(raw, minlength=n_states)
        first = np.full(n_states, obs.size)
        for k in range(n_states):
            hit = np.flatnonzero(raw == k)
            if hit.size:
                first[k] = hit[0]
        order = sorted(range(n_states), key=lambda k: (-sizes[k], first[k]))
        relabel = np.empty(n_states, dtype=np.int64)
        relabel[order] = np.arange(n_states)
        labels = relabel[raw]

    pi_c = np.full(n_states, smoothing)
    trans_c = np.full((n_states, n_states), smoothing)
    emit_c = np.full((n_states, n_symbols), smoothing)
    np.add.at(emit_c, (labels, obs), 1.0)
    np.add.at(pi_c, labels[offsets[:-1]], 1.0)
    inner = np.ones(obs.size, dtype=bool)
    inner[offsets[1:] - 1] = False  # last event of each case has no successor
    src = np.flatnonzero(inner)
    np.add.at(trans_c, (labels[src], labels[src + 1]), 1.0)
    return HmmModel(
        pi_c / pi_c.sum(),
        trans_c / trans_c.sum(axis=1, keepdims=True),
        emit_c / emit_c.sum(axis=1, keepdims=True),
    )


def _normalise(counts: np.ndarray) -> np.ndarray:
    counts = counts + BW_FLOOR
    return counts / counts.sum(axis=-1, keepdims=True)


def baum_welch(
    model: HmmModel,
    sequences,
    max_iterations: int = 50,
    tolerance: float | None = 1e-6,
) -> tuple[HmmModel, TrainingReport]:
    """Multi-sequence Baum-Welch.

    Each iteration evaluates the total log-likelihood of the current model
    (recorded in the report) and re-estimates pi, trans and emit from the
    expected counts. Training stops after ``max_iterations`` updates, or
    before updating when the likelihood gain drops below ``tolerance``
    (``None`` disables early stopping).
    """
    obs, offsets = _pack(sequences, model.n_symbols)
    report = TrainingReport()
    degenerate: set[int] = set()
    current = model
    prev = None
    for _ in range(max_iterations):
        ll, pi_acc, trans_acc, emit_acc, occ = _accumulate(
            current.pi, current.trans, current.emit, obs, offsets
        )
        ll = float(ll)
        report.log_likelihood_per_iteration.append(ll)
        report.iterations_run += 1
        if tolerance is not None and prev is not None and ll - prev < tolerance:
            report.converged_early = True
            break
        prev = ll
        degenerate.update(int(i) for i in np.flatnonzero(occ <= BW_FLOOR))
        current = HmmModel(_normalise(pi_acc), _normalise(trans_acc), _normalise(emit_acc))
    report.degenerate_states = sorted(degenerate)
    return current, report


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class FixedLength:
    length: int

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.length < 1:
            raise HmmError("fixed length must be >= 1")
        return np.full(n, self.length, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"kind": "fixed", "length": self.length}


@dataclass(frozen=True)
class GeometricLength:
    """Geometric lengths on {1, 2, ...} with success probability p, capped at max_length."""

    p: float
    max_length: int

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if not 0 < self.p <= 1 or self.max_length < 1:
            raise HmmError("geometric law needs 0 < p <= 1 and max_length >= 1")
        return np.minimum(rng.geometric(self.p, size=n), self.max_length).astype(np.int64)

    def to_dict(self) -> dict:
        return {"kind": "geometric", "p": self.p, "max_length": self.max_length}


def length_law_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "fixed":
        return FixedLength(int(d["length"]))
    if kind == "geometric":
        return GeometricLength(float(d["p"]), int(d["max_length"]))
    raise HmmError(f"unknown length law {kind!r}")


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    # cdf rows end at exactly 1.0; u in [0, 1)
    return np.minimum((cdf <= u[:, None]).sum(axis=1), cdf.shape[1] - 1)


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c /= c[..., -1:]
    c[..., -1] = 1.0
    return c


def sample(model: HmmModel, n_cases: int, length_law, seed: int = 0,
           return_states: bool = False):
    """Draw ``n_cases`` symbol sequences (optionally with their state paths).

    ``length_law`` is a :class:`FixedLength`, a :class:`GeometricLength` or a
    plain int meaning a fixed length.
    """
    if isinstance(length_law, int):
        length_law = FixedLength(length_law)
    if n_cases <= 0:
        return ([], []) if return_states else []
    rng = np.random.default_rng(seed)
    lengths = length_law.draw(rng, n_cases)
    horizon = int(lengths.max())
    pi_cdf = _cdf(model.pi[None, :])
    trans_cdf = _cdf(model.trans)
    emit_cdf = _cdf(model.emit)
    states = np.zeros((n_cases, horizon), dtype=np.int64)
    symbols = np.zeros((n_cases, horizon), dtype=np.int64)
    cur = _inverse_cdf(np.broadcast_to(pi_cdf, (n_cases, model.n_states)), rng.random(n_cases))
    for t in range(horizon):
        if t > 0:
            cur = _inverse_cdf(trans_cdf[cur], rng.random(n_cases))
        states[:, t] = cur
        symbols[:, t] = _inverse_cdf(emit_cdf[cur], rng.random(n_cases))
    seqs = [symbols[k, : lengths[k]].tolist() for k in range(n_cases)]
    if return_states:
        return seqs, [states[k, : lengths[k]].tolist() for k in range(n_cases)]
    return seqs


# ---------------------------------------------------------------------------
# JSON


def model_to_dict(model: HmmModel, vocabulary: Vocabulary | None = None) -> dict:
    doc = {
        "n_states": model.n_states,
        "n_symbols": model.n_symbols,
        "pi": model.pi.tolist(),
        "trans": model.trans.tolist(),
        "emit": model.emit.tolist(),
    }
    if vocabulary is not None:
        doc["vocabulary"] = vocabulary.to_dict()
    return doc


def model_from_dict(doc: dict) -> tuple[HmmModel, Vocabulary | None]:
    if not isinstance(doc, dict):
        raise HmmError("model document must be a JSON object")
    for key in ("n_states", "n_symbols", "pi", "trans", "emit"):
        if key not in doc:
            raise HmmError(f"model document lacks {key!r}")
    try:
        model = HmmModel(doc["pi"], doc["trans"], doc["emit"])
    except (TypeError, ValueError) as exc:
        raise HmmError(f"invalid model document: {exc}") from None
    if (model.n_states, model.n_symbols) != (doc["n_states"], doc["n_symbols"]):
        raise HmmError("declared n_states/n_symbols disagree with the matrices")
    vocab = None
    if doc.get("vocabulary") is not None:
        vocab = Vocabulary.from_mapping(doc["vocabulary"])
        if len(vocab) != model.n_symbols:
            raise HmmError("vocabulary size does not match n_symbols")
    return model, vocab


def serialize_model(model: HmmModel, vocabulary: Vocabulary | None = None, **extra) -> str:
    doc = model_to_dict(model, vocabulary)
    doc.update(extra)
    return json.dumps(doc, indent=2)


def deserialize_model(text: str) -> tuple[HmmModel, Vocabulary | None]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HmmError(f"malformed model JSON: {exc}") from None
    return model_from_dict(doc)
