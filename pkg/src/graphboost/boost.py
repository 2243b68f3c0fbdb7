"""SAMME-style multi-class boosting over candidate similarity graphs.

Each round trains one APPNP weak classifier per candidate graph under the
current sample weights, keeps the one with the smallest weighted train
error, weights it by

    alpha = eta * (0.5 * log((1 - err) / err) + log(K - 1)),

then multiplies the weights of misclassified train rows by exp(alpha) and
renormalizes. The loop stops early when the newest weak error or the
running ensemble error rate reaches (K - 1) / K.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import math
import multiprocessing

import numpy as np

from . import appnp
from .appnp import AppnpConfig, AppnpModel, train_weak
from .data import Dataset, EncodingMeta, TRAIN, VAL
from .errors import DataError, NoWeakLearnability, TrainingDiverged
from .graph import (DEFAULT_EDGE_CAP, DEFAULT_PAIR_CAP, CandidateGraph,
                    build_adjacency, enumerate_candidates)
from .rng import derive_seed

log = logging.getLogger("graphboost.boost")


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 10
    learning_rate: float = 1.0  # shrinkage on alpha
    weak: AppnpConfig = field(default_factory=AppnpConfig)
    expert_edges: tuple = ()  # (feature name or index, raw threshold)
    workers: int = 0
    seed: int = 0
    pair_cap: int = DEFAULT_PAIR_CAP
    edge_cap: int = DEFAULT_EDGE_CAP

    def __post_init__(self):
        if self.n_rounds < 1:
            raise DataError("need at least one boosting round")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DataError("boost learning rate must be in (0, 1]")


@dataclass
class BoostState:
    weights: np.ndarray  # over all rows, nonzero on the train mask, sum 1
    iteration: int = 0
    terminated: bool = False
    reason: str | None = None


@dataclass
class WeakRound:
    feature: int
    feature_name: str
    gamma: float
    model: AppnpModel
    alpha: float
    error: float
    expert: bool = False


@dataclass
class Ensemble:
    rounds: list
    n_classes: int
    encoder: EncodingMeta
    feature_names: list[str]
    train_x: np.ndarray  # encoded rows seen at fit time, for graph rebuilds
    stop_reason: str | None = None
    stop_error: float | None = None


def weighted_error(predictions: np.ndarray, y: np.ndarray, w: np.ndarray,
                   mask: np.ndarray) -> float:
    """Sum of weights over masked rows where prediction != label."""
    mask = np.asarray(mask, dtype=bool)
    return float(np.sum(w[mask] * (predictions[mask] != y[mask])))


def compute_alpha(err: float, n_classes: int, learning_rate: float = 1.0) -> float:
    """Learner weight; err is clamped away from 0 and 1 first."""
    if n_classes < 2:
        raise DataError("need at least 2 classes")
    e = min(max(err, 1e-10), 1.0 - 1e-10)
    return learning_rate * (0.5 * math.log((1.0 - e) / e)
                            + math.log(n_classes - 1))


def update_weights(w: np.ndarray, predictions: np.ndarray, y: np.ndarray,
                   alpha: float, mask: np.ndarray) -> np.ndarray:
    """Multiply misclassified masked rows by exp(alpha), then renormalize
    the masked weights to sum 1. Rows outside the mask are untouched."""
    if not math.isfinite(alpha):
        raise DataError("alpha must be finite")
    mask = np.asarray(mask, dtype=bool)
    out = w.copy()
    wrong = mask & (predictions != y)
    out[wrong] *= math.exp(alpha)
    total = out[mask].sum()
    assert total > 0.0, "all masked weights vanished"
    out[mask] /= total
    return out


def _candidate_sort_key(idx: int, cand: CandidateGraph, err: float) -> tuple:
    return (err, cand.feature, cand.gamma, cand.expert, idx)


def _train_candidate(cand: CandidateGraph, x: np.ndarray, y: np.ndarray,
                     w_eval: np.ndarray, train_mask: np.ndarray,
                     val_mask: np.ndarray, n_classes: int,
                     weak_config: AppnpConfig):
    """Train one weak learner; returns (err, model, labels) or None if the
    candidate diverged."""
    try:
        model, _ = train_weak(weak_config, x, cand.adjacency, y, w_eval,
                              train_mask, val_mask, n_classes=n_classes)
    except TrainingDiverged as exc:
        log.warning("candidate on feature %d (gamma=%g) diverged: %s",
                    cand.feature, cand.gamma, exc)
        return None
    labels, _ = appnp.predict(model, x, cand.adjacency)
    err = weighted_error(labels, y, w_eval, train_mask)
    return err, model, labels


# Worker-side state for parallel candidate training. Each spawned worker
# rebuilds the candidate list once from the same inputs the parent used,
# so results are identical to the serial path.
_WORKER: dict = {}


def _worker_init(x, y, train_mask, val_mask, n_classes, expert_edges,
                 feature_names, feature_scales, pair_cap, edge_cap, graph_seed):
    _WORKER.update(x=x, y=y, train_mask=train_mask, val_mask=val_mask,
                   n_classes=n_classes, expert_edges=expert_edges,
                   feature_names=feature_names, feature_scales=feature_scales,
                   pair_cap=pair_cap, edge_cap=edge_cap,
                   graph_seed=graph_seed, candidates=None)


def _worker_run(args):
    idx, w_eval, weak_config = args
    if _WORKER["candidates"] is None:
        _WORKER["candidates"] = enumerate_candidates(
            _WORKER["x"], _WORKER["expert_edges"], _WORKER["feature_names"],
            _WORKER["feature_scales"], pair_cap=_WORKER["pair_cap"],
            edge_cap=_WORKER["edge_cap"], seed=_WORKER["graph_seed"])
    cand = _WORKER["candidates"][idx]
    res = _train_candidate(cand, _WORKER["x"], _WORKER["y"], w_eval,
                           _WORKER["train_mask"], _WORKER["val_mask"],
                           _WORKER["n_classes"], weak_config)
    if res is None:
        return idx, None
    err, model, labels = res
    return idx, (err, (model.w1, model.b1, model.w2, model.b2), labels)


class _CandidatePool:
    """Process pool that trains candidates in parallel with results merged
    in deterministic candidate order."""

    def __init__(self, workers: int, x, y, train_mask, val_mask, n_classes,
                 expert_edges, feature_names, feature_scales, pair_cap,
                 edge_cap, graph_seed):
        ctx = multiprocessing.get_context("spawn")
        self._executor = ProcessPoolExecutor(
            max_workers=workers, mp_context=ctx, initializer=_worker_init,
            initargs=(x, y, train_mask, val_mask, n_classes, expert_edges,
                      feature_names, feature_scales, pair_cap, edge_cap,
                      graph_seed))

    def run_all(self, n_candidates: int, w_eval: np.ndarray,
                weak_config: AppnpConfig) -> list:
        tasks = [(i, w_eval, weak_config) for i in range(n_candidates)]
        results: list = [None] * n_candidates
        for idx, payload in self._executor.map(_worker_run, tasks):
            if payload is None:
                results[idx] = None
                continue
            err, weights, labels = payload
            model = AppnpModel(*(np.ascontiguousarray(a) for a in weights),
                               config=weak_config)
            results[idx] = (err, model, labels)
        return results

    def close(self):
        self._executor.shutdown()


def run_round(state: BoostState, candidates: list, x: np.ndarray,
              y: np.ndarray, train_mask: np.ndarray, val_mask: np.ndarray,
              n_classes: int, weak_config: AppnpConfig,
              feature_names: list[str] | None = None,
              boost_lr: float = 1.0,
              pool: "_CandidatePool | None" = None) -> tuple[WeakRound, np.ndarray]:
    """Train a weak learner on every candidate and return the round built
    from the lowest-weighted-error one (ties: lower feature index, smaller
    gamma, non-expert first), plus its transductive predictions."""
    if state.terminated:
        raise DataError("boosting already terminated")
    if not candidates:
        raise DataError("no candidate graphs")

    # Validation rows get uniform weights: boosting weights live on the
    # train rows only.
    w_eval = state.weights.copy()
    val_mask = np.asarray(val_mask, dtype=bool)
    w_eval[val_mask] = 1.0 / val_mask.sum()

    if pool is not None:
        results = pool.run_all(len(candidates), w_eval, weak_config)
    else:
        results = [_train_candidate(c, x, y, w_eval, train_mask, val_mask,
                                    n_classes, weak_config)
                   for c in candidates]

    best = None
    best_key = None
    for idx, res in enumerate(results):
        if res is None:
            continue
        err = res[0]
        key = _candidate_sort_key(idx, candidates[idx], err)
        if best_key is None or key < best_key:
            best_key = key
            best = (idx, res)
    if best is None:
        raise DataError("all candidates diverged")

    idx, (err, model, labels) = best
    cand = candidates[idx]
    alpha = compute_alpha(err, n_classes, boost_lr)
    name = feature_names[cand.feature] if feature_names else str(cand.feature)
    round_ = WeakRound(cand.feature, name, cand.gamma, model, alpha, err,
                       cand.expert)
    return round_, labels


def fit(config: BoostConfig, dataset: Dataset) -> Ensemble:
    """Run the full boosting loop on an encoded dataset.

    Stops early when the newest weak error reaches (K-1)/K (that round is
    discarded) or the running ensemble train error rate does (that round is
    kept). Raises NoWeakLearnability if the first round already fails.
    """
    x, y, k = dataset.X, dataset.y, dataset.n_classes
    train_mask = dataset.mask(TRAIN)
    val_mask = dataset.mask(VAL)
    if not train_mask.any():
        raise DataError("train split is empty")
    if not val_mask.any():
        raise DataError("validation split is empty (weak learners early-stop "
                        "on it)")

    names = dataset.encoder.feature_names()
    scales = dataset.encoder.feature_scales()
    graph_seed = derive_seed(config.seed, "graphs")
    candidates = enumerate_candidates(x, config.expert_edges, names, scales,
                                      pair_cap=config.pair_cap,
                                      edge_cap=config.edge_cap,
                                      seed=graph_seed)
    if not candidates:
        raise DataError("no candidate graphs survived the edge cap")

    weights = np.zeros(len(y), dtype=np.float64)
    weights[train_mask] = 1.0 / train_mask.sum()
    state = BoostState(weights)

    pool = None
    if config.workers and config.workers > 1:
        pool = _CandidatePool(config.workers, x, y, train_mask, val_mask, k,
                              config.expert_edges, names, scales,
                              config.pair_cap, config.edge_cap, graph_seed)

    gate = (k - 1) / k
    rounds: list[WeakRound] = []
    votes = np.zeros((len(y), k), dtype=np.float64)
    stop_reason = None
    stop_error = None
    try:
        for t in range(1, config.n_rounds + 1):
            weak_cfg = replace(config.weak,
                               seed=derive_seed(config.seed, "weak", t))
            round_, labels = run_round(state, candidates, x, y, train_mask,
                                       val_mask, k, weak_cfg, names,
                                       config.learning_rate, pool)
            state.iteration = t
            if round_.error >= gate:
                if not rounds:
                    raise NoWeakLearnability(
                        f"first round weak error {round_.error:.4f} >= "
                        f"{gate:.4f}", error=round_.error)
                stop_reason = "weak_error"
                stop_error = round_.error
                log.info("round %d discarded: weak error %.4f >= %.4f",
                         t, round_.error, gate)
                break

            rounds.append(round_)
            log.info("round %d: feature %d (%s) gamma=%.6g err=%.4f alpha=%.4f%s",
                     t, round_.feature, round_.feature_name, round_.gamma,
                     round_.error, round_.alpha,
                     " [expert]" if round_.expert else "")
            votes[np.arange(len(y)), labels] += round_.alpha
            state.weights = update_weights(state.weights, labels, y,
                                           round_.alpha, train_mask)
            ens_err = float(np.mean(
                np.argmax(votes[train_mask], axis=1) != y[train_mask]))
            if ens_err >= gate:
                stop_reason = "ensemble_error"
                stop_error = round_.error
                log.info("round %d kept, stopping: ensemble train error "
                         "%.4f >= %.4f", t, ens_err, gate)
                break
    finally:
        if pool is not None:
            pool.close()
    state.terminated = stop_reason is not None
    state.reason = stop_reason

    return Ensemble(rounds, k, dataset.encoder, names, x.copy(),
                    stop_reason, stop_error)


def _vote_scores(ensemble: Ensemble, x_all: np.ndarray,
                 row_start: int) -> tuple[np.ndarray, np.ndarray]:
    n = x_all.shape[0] - row_start
    votes = np.zeros((n, ensemble.n_classes), dtype=np.float64)
    for round_ in ensemble.rounds:
        cand = build_adjacency(x_all[:, round_.feature], round_.gamma,
                               feature=round_.feature)
        labels, _ = appnp.predict(round_.model, x_all, cand.adjacency)
        votes[np.arange(n), labels[row_start:]] += round_.alpha
    labels = np.argmax(votes, axis=1)
    return labels, votes / votes.sum(axis=1, keepdims=True)


def transductive_scores(ensemble: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble labels and normalized vote scores for the rows seen at fit
    time, using graphs over those rows alone."""
    if not ensemble.rounds:
        raise DataError("empty ensemble")
    return _vote_scores(ensemble, ensemble.train_x, 0)


def predict_ensemble(ensemble: Ensemble,
                     new_x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Transductive prediction for new rows.

    Every round's graph is rebuilt over the stored fit-time rows plus the
    new rows, so new samples propagate from the cohort the model was
    trained on. Returns hard labels and vote scores normalized to sum 1
    per row.
    """
    if not ensemble.rounds:
        raise DataError("empty ensemble")
    new_x = np.asarray(new_x, dtype=np.float64)
    if new_x.ndim != 2 or new_x.shape[1] != ensemble.train_x.shape[1]:
        raise DataError("new rows have the wrong number of features")
    n_new = new_x.shape[0]
    if n_new == 0:
        return (np.zeros(0, dtype=np.int64),
                np.zeros((0, ensemble.n_classes), dtype=np.float64))
    x_all = np.vstack([ensemble.train_x, new_x])
    return _vote_scores(ensemble, x_all, ensemble.train_x.shape[0])
