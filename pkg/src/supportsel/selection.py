"""Per-target model selection: CCR scoring, 10-fold cross-validation, grid
search over pipeline configurations, and consensus voting.

Seeding: one top-level seed drives everything through a documented hash
(:func:`derive_seed`, blake2b over the joined string forms of its parts):

* fold assignment for a target:   derive_seed(seed, "folds", target)
* model fit in fold f:            derive_seed(seed, "fit", target, config_key, f)
* final full-data refit:          derive_seed(seed, "final", target, config_key)

so runs are reproducible end to end while per-config randomness stays
decorrelated, and a member model refit inside a consensus evaluation is
bit-identical to the same model fit during its own grid evaluation.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import learners
from .learners import FAMILY_RANK, LearnerSpec, TrainedModel, spec_from_dict
from .survey import BinaryView, Dataset, InactiveTargetError, binarize, class_balance

N_FOLDS = 10


class SelectionError(ValueError):
    """Invalid evaluation request (bad grid, mismatched view, empty input)."""


def derive_seed(*parts) -> int:
    """64-bit seed hashed from the '|'-joined string forms of the parts."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


# ---------------------------------------------------------------------------
# configurations

@dataclass(frozen=True)
class PipelineConfig:
    """One evaluated configuration: threshold, input encoding, learner, consensus.

    ``learner`` may be None only on a consensus entry, meaning "vote over the
    best member of each family at this threshold/encoding"; the winning
    member family is resolved during evaluation.
    """

    threshold: int
    inputs_binarized: bool
    learner: LearnerSpec | None
    use_consensus: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.threshold <= 5:
            raise SelectionError(f"threshold must be in [0, 5], got {self.threshold}")
        if self.learner is None and not self.use_consensus:
            raise SelectionError("learner may be omitted only on consensus entries")

    def key(self) -> str:
        learner = "consensus" if self.learner is None else self.learner.key()
        inputs = "binary" if self.inputs_binarized else "numeric"
        cons = "yes" if self.use_consensus else "no"
        return f"thr={self.threshold}|in={inputs}|cons={cons}|{learner}"

    def sort_key(self) -> tuple:
        """Deterministic tie-break order: simpler family first, then smaller
        hyperparameters, then lower threshold, numeric inputs, no consensus."""
        if self.learner is None:
            family_rank, hyper = len(FAMILY_RANK), ()
        else:
            family_rank = FAMILY_RANK[self.learner.family]
            hyper = self.learner.hyper_sort_key()
        return (family_rank, hyper, self.threshold, self.inputs_binarized,
                self.use_consensus)

    def to_dict(self) -> dict:
        out = {
            "threshold": self.threshold,
            "inputs": "binary" if self.inputs_binarized else "numeric",
            "consensus": self.use_consensus,
        }
        if self.learner is not None:
            out["family"] = self.learner.family
            out["params"] = self.learner.params
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        inputs = payload.get("inputs", "numeric")
        if inputs not in ("numeric", "binary"):
            raise SelectionError(f"inputs must be 'numeric' or 'binary', got {inputs!r}")
        learner = None
        if "family" in payload:
            learner = spec_from_dict(payload)
        return cls(
            threshold=int(payload["threshold"]),
            inputs_binarized=inputs == "binary",
            learner=learner,
            use_consensus=bool(payload.get("consensus", False)),
        )


def default_grid() -> list[PipelineConfig]:
    """Thresholds {1, 4} x both encodings x all families, plus one consensus
    entry per threshold/encoding pair."""
    specs = [
        learners.rf_spec(50),
        learners.knn_spec(5), learners.knn_spec(7),
        learners.knn_spec(9), learners.knn_spec(11),
        learners.svm_spec("linear"), learners.svm_spec("rbf"),
        learners.lr_spec(),
    ]
    grid: list[PipelineConfig] = []
    for threshold in (1, 4):
        for binarized in (False, True):
            for spec in specs:
                grid.append(PipelineConfig(threshold, binarized, spec))
            grid.append(PipelineConfig(threshold, binarized, None, use_consensus=True))
    return grid


# ---------------------------------------------------------------------------
# scoring and folds

def ccr(y_true, y_pred) -> float:
    """Correct classification rate: agreements / total."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise SelectionError(f"label vectors differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise SelectionError("cannot score empty label vectors")
    return float(np.mean(y_true == y_pred))


@dataclass(frozen=True)
class FoldPlan:
    n: int
    k: int
    seed: int
    assignment: np.ndarray  # fold index per record

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(n: int, k: int = N_FOLDS, seed: int = 0) -> FoldPlan:
    """Shuffle [0, n) by seed and cut into k contiguous blocks; the first
    n % k folds take the extra record, so sizes differ by at most one."""
    if n < k:
        raise SelectionError(f"cannot make {k} folds from {n} records")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int32)
    base, extra = divmod(n, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignment[order[start:start + size]] = fold
        start += size
    return FoldPlan(n=n, k=k, seed=seed, assignment=assignment)


# ---------------------------------------------------------------------------
# results

@dataclass
class TargetResult:
    target: str
    best_config: PipelineConfig
    mean_ccr: float
    per_fold_ccr: list[float]
    positive_rate: float
    pooled_ccr: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "best_config": self.best_config.to_dict(),
            "mean_ccr": self.mean_ccr,
            "per_fold_ccr": self.per_fold_ccr,
            "positive_rate": self.positive_rate,
            "pooled_ccr": self.pooled_ccr,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TargetResult":
        return cls(
            target=payload["target"],
            best_config=PipelineConfig.from_dict(payload["best_config"]),
            mean_ccr=float(payload["mean_ccr"]),
            per_fold_ccr=[float(v) for v in payload["per_fold_ccr"]],
            positive_rate=float(payload["positive_rate"]),
            pooled_ccr=float(payload["pooled_ccr"]),
            diagnostics=dict(payload.get("diagnostics", {})),
        )


def _check_view(config: PipelineConfig, view: BinaryView) -> None:
    if config.threshold != view.threshold or config.inputs_binarized != view.inputs_binarized:
        raise SelectionError(
            f"config ({config.threshold}, "
            f"{'binary' if config.inputs_binarized else 'numeric'}) does not match view "
            f"({view.threshold}, {'binary' if view.inputs_binarized else 'numeric'})"
        )


def _fit_fold(config: PipelineConfig, X: np.ndarray, y: np.ndarray,
              seed: int, target: str, fold: int) -> TrainedModel:
    fit_seed = derive_seed(seed, "fit", target, config.key(), fold)
    return learners.fit(config.learner, X, y, seed=fit_seed)


def _cross_validate_full(
    config: PipelineConfig,
    view: BinaryView,
    target: str,
    seed: int,
    folds: FoldPlan | None = None,
    collect_fit_hashes: bool = False,
) -> tuple[TargetResult, list[np.ndarray]]:
    """Run the fold loop and also return per-fold test predictions."""
    if config.use_consensus:
        raise SelectionError("consensus configs are evaluated by consensus_cv")
    _check_view(config, view)
    if target not in view.y:
        raise InactiveTargetError(target)
    y = view.y[target]
    X = view.X
    folds = folds or make_folds(view.n, N_FOLDS, derive_seed(seed, "folds", target))
    if folds.n != view.n:
        raise SelectionError(f"fold plan covers {folds.n} records, view has {view.n}")

    fold_ccrs: list[float] = []
    predictions: list[np.ndarray] = []
    degenerate_folds: list[int] = []
    fit_hashes: list[str] = []
    agreements = 0
    for fold in range(folds.k):
        train = folds.train_indices(fold)
        test = folds.test_indices(fold)
        model = _fit_fold(config, X[train], y[train], seed, target, fold)
        if model.degenerate:
            degenerate_folds.append(fold)
        if collect_fit_hashes:
            fit_hashes.append(model.fingerprint())
        pred = learners.predict_many(model, X[test])
        predictions.append(pred)
        fold_ccrs.append(ccr(y[test], pred))
        agreements += int((y[test] == pred).sum())

    positive_rate = class_balance(view, target)
    diagnostics = {
        "degenerate_folds": degenerate_folds,
        "trivial_baseline_ccr": max(positive_rate, 1.0 - positive_rate),
    }
    if collect_fit_hashes:
        diagnostics["fit_hashes"] = fit_hashes
    result = TargetResult(
        target=target,
        best_config=config,
        mean_ccr=float(np.mean(fold_ccrs)),
        per_fold_ccr=fold_ccrs,
        positive_rate=positive_rate,
        pooled_ccr=agreements / view.n,
        diagnostics=diagnostics,
    )
    return result, predictions


def cross_validate(config: PipelineConfig, view: BinaryView, target: str,
                   seed: int = 0, folds: FoldPlan | None = None,
                   collect_fit_hashes: bool = False) -> TargetResult:
    """10-fold CV of one configuration; fitting reads training rows only."""
    result, _ = _cross_validate_full(config, view, target, seed, folds,
                                     collect_fit_hashes)
    return result


# ---------------------------------------------------------------------------
# consensus

def _vote_matrix(member_predictions: list[np.ndarray],
                 member_ccrs: list[float] | None) -> np.ndarray:
    """Modal label per column; ties go to the best-CCR member, then to 0."""
    stack = np.vstack(member_predictions)
    n_members, n_rows = stack.shape
    ones = stack.sum(axis=0)
    out = (2 * ones > n_members).astype(np.int8)
    tied = np.flatnonzero(2 * ones == n_members)
    if tied.size:
        if member_ccrs is None:
            out[tied] = 0
        else:
            ccrs = np.asarray(member_ccrs)
            best = np.flatnonzero(ccrs == ccrs.max())
            for col in tied:
                labels = np.unique(stack[best, col])
                out[col] = labels[0] if labels.size == 1 else 0
    return out


def consensus_predict(models: list[TrainedModel], x: np.ndarray,
                      member_ccrs: list[float] | None = None) -> int:
    """Most frequent member prediction; ties resolved by the member with the
    highest recorded individual CV CCR, then label 0."""
    if len(models) < 2:
        raise SelectionError("consensus needs at least 2 member models")
    dims = {m.n_features for m in models}
    if len(dims) != 1:
        raise SelectionError(f"member models disagree on dimensionality: {sorted(dims)}")
    if member_ccrs is not None and len(member_ccrs) != len(models):
        raise SelectionError("member_ccrs length must match models")
    votes = [np.array([learners.predict(m, x)], dtype=np.int8) for m in models]
    return int(_vote_matrix(votes, member_ccrs)[0])


def _consensus_from_predictions(
    target: str,
    view: BinaryView,
    folds: FoldPlan,
    member_results: list[TargetResult],
    member_predictions: list[list[np.ndarray]],
) -> TargetResult:
    """Score consensus voting from already-computed member fold predictions."""
    member_ccrs = [r.mean_ccr for r in member_results]
    y = view.y[target]
    fold_ccrs: list[float] = []
    agreements = 0
    for fold in range(folds.k):
        test = folds.test_indices(fold)
        voted = _vote_matrix([preds[fold] for preds in member_predictions], member_ccrs)
        fold_ccrs.append(ccr(y[test], voted))
        agreements += int((y[test] == voted).sum())

    # The table row for a consensus result is labeled with the lead member:
    # the family whose individual CV score is highest.
    lead = max(range(len(member_results)),
               key=lambda i: (member_results[i].mean_ccr,
                              -FAMILY_RANK[member_results[i].best_config.learner.family]))
    lead_config = member_results[lead].best_config
    config = PipelineConfig(lead_config.threshold, lead_config.inputs_binarized,
                            lead_config.learner, use_consensus=True)
    positive_rate = class_balance(view, target)
    return TargetResult(
        target=target,
        best_config=config,
        mean_ccr=float(np.mean(fold_ccrs)),
        per_fold_ccr=fold_ccrs,
        positive_rate=positive_rate,
        pooled_ccr=agreements / view.n,
        diagnostics={
            "trivial_baseline_ccr": max(positive_rate, 1.0 - positive_rate),
            "consensus_members": [
                {"config": r.best_config.key(),
                 "config_dict": r.best_config.to_dict(),
                 "mean_ccr": r.mean_ccr}
                for r in member_results
            ],
        },
    )


def consensus_cv(dataset: Dataset, target: str,
                 member_configs: list[PipelineConfig], seed: int = 0,
                 view: BinaryView | None = None) -> TargetResult:
    """Cross-validate a consensus vote: every member is fit per fold, the vote
    is scored on the fold's test rows.

    Members must agree on threshold and input encoding (a consensus table row
    carries a single Thr/Input). Member fits are seeded exactly as in their
    own evaluations, so this equals voting over cached member predictions.
    """
    if len(member_configs) < 2:
        raise SelectionError("consensus needs at least 2 member configurations")
    thr_inputs = {(c.threshold, c.inputs_binarized) for c in member_configs}
    if len(thr_inputs) != 1:
        raise SelectionError(
            f"consensus members must share threshold and input encoding, got {sorted(thr_inputs)}"
        )
    if any(c.use_consensus for c in member_configs):
        raise SelectionError("consensus members must be plain configurations")
    threshold, binarized = next(iter(thr_inputs))
    if view is None:
        view = binarize(dataset, threshold, binarized)
    folds = make_folds(view.n, N_FOLDS, derive_seed(seed, "folds", target))

    member_results: list[TargetResult] = []
    member_predictions: list[list[np.ndarray]] = []
    for config in member_configs:
        result, predictions = _cross_validate_full(config, view, target, seed, folds)
        member_results.append(result)
        member_predictions.append(predictions)
    return _consensus_from_predictions(target, view, folds, member_results,
                                       member_predictions)


# ---------------------------------------------------------------------------
# grid search

def _views_for_grid(dataset: Dataset, grid: list[PipelineConfig],
                    impute_policy: str = "drop") -> dict[tuple[int, bool], BinaryView]:
    views: dict[tuple[int, bool], BinaryView] = {}
    for config in grid:
        key = (config.threshold, config.inputs_binarized)
        if key not in views:
            views[key] = binarize(dataset, config.threshold, config.inputs_binarized,
                                  impute_policy)
    return views


def grid_search(dataset: Dataset, target: str, grid: list[PipelineConfig],
                seed: int = 0,
                views: dict[tuple[int, bool], BinaryView] | None = None) -> TargetResult:
    """Evaluate every configuration for one target and return the winner.

    Consensus entries vote over the best already-evaluated member of each
    family at the same threshold/encoding. Ties on mean CCR go to the
    simpler configuration (family order RF < KNN < SVM < LR, then smaller
    hyperparameters, then lower threshold); the tie count is recorded.
    """
    if not grid:
        raise SelectionError("grid must contain at least one configuration")
    views = views or _views_for_grid(dataset, grid)

    base = [c for c in grid if not c.use_consensus]
    consensus_entries = [c for c in grid if c.use_consensus]

    evaluated: list[TargetResult] = []
    cache: dict[tuple[int, bool], dict[str, tuple[TargetResult, list[np.ndarray]]]] = {}
    for config in base:
        key = (config.threshold, config.inputs_binarized)
        view = views[key]
        folds = make_folds(view.n, N_FOLDS, derive_seed(seed, "folds", target))
        result, predictions = _cross_validate_full(config, view, target, seed, folds)
        evaluated.append(result)
        cache.setdefault(key, {})[config.key()] = (result, predictions)

    for entry in consensus_entries:
        # Membership comes from the evaluated families; a learner tag on a
        # consensus entry (as carried by winning rows) is informational only.
        key = (entry.threshold, entry.inputs_binarized)
        pool = cache.get(key, {})
        member_configs = _best_per_family(pool, base, key)
        if len(member_configs) < 2:
            raise SelectionError(
                "consensus entry needs at least two evaluated families at "
                f"threshold {entry.threshold}, "
                f"{'binary' if entry.inputs_binarized else 'numeric'} inputs"
            )
        view = views[key]
        folds = make_folds(view.n, N_FOLDS, derive_seed(seed, "folds", target))
        member_results = [pool[c.key()][0] for c in member_configs]
        member_predictions = [pool[c.key()][1] for c in member_configs]
        evaluated.append(_consensus_from_predictions(target, view, folds,
                                                     member_results, member_predictions))

    best_ccr = max(r.mean_ccr for r in evaluated)
    tied = [r for r in evaluated if r.mean_ccr == best_ccr]
    winner = min(tied, key=lambda r: r.best_config.sort_key())
    winner.diagnostics = dict(winner.diagnostics)
    winner.diagnostics["n_tied_best"] = len(tied)
    winner.diagnostics["grid_scores"] = {r.best_config.key(): r.mean_ccr for r in evaluated}
    return winner


def _best_per_family(pool, base_configs, key) -> list[PipelineConfig]:
    """Best evaluated member of each family at a (threshold, encoding) pair."""
    best: dict[str, tuple[float, tuple, PipelineConfig]] = {}
    for config in base_configs:
        if (config.threshold, config.inputs_binarized) != key:
            continue
        result = pool[config.key()][0]
        family = config.learner.family
        candidate = (-result.mean_ccr, config.sort_key(), config)
        if family not in best or candidate[:2] < best[family][:2]:
            best[family] = candidate
    ordered = sorted(best.values(), key=lambda item: FAMILY_RANK[item[2].learner.family])
    return [item[2] for item in ordered]


# ---------------------------------------------------------------------------
# full run

_WORKER_CTX: dict = {}


def _init_worker(views, grid, seed):
    _WORKER_CTX["views"] = views
    _WORKER_CTX["grid"] = grid
    _WORKER_CTX["seed"] = seed


def _eval_target_worker(target: str):
    try:
        result = grid_search(
            dataset=None,  # views are prebuilt; dataset is not consulted
            target=target,
            grid=_WORKER_CTX["grid"],
            seed=_WORKER_CTX["seed"],
            views=_WORKER_CTX["views"],
        )
        return target, result, None
    except Exception as exc:  # recorded per target, not fatal to the run
        return target, None, f"{type(exc).__name__}: {exc}"


def run_all_targets(dataset: Dataset, grid: list[PipelineConfig] | None = None,
                    seed: int = 0, jobs: int = 1, impute_policy: str = "drop"):
    """Grid-search every active target and aggregate into an EvaluationReport.

    Target evaluations are independent; with jobs > 1 they fan out to a
    process pool. A failing target is recorded in the report, not fatal.
    """
    from .reporting import EvaluationReport, build_report

    grid = grid if grid is not None else default_grid()
    if not grid:
        raise SelectionError("grid must contain at least one configuration")
    views = _views_for_grid(dataset, grid, impute_policy)
    targets = dataset.active_targets

    results: dict[str, TargetResult] = {}
    failures: dict[str, str] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(views, grid, seed)) as pool:
            for target, result, error in pool.map(_eval_target_worker, targets):
                if error is None:
                    results[target] = result
                else:
                    failures[target] = error
    else:
        _init_worker(views, grid, seed)
        for target in targets:
            target, result, error = _eval_target_worker(target)
            if error is None:
                results[target] = result
            else:
                failures[target] = error

    ordered = [results[t] for t in targets if t in results]
    return build_report(dataset, ordered, failures, seed=seed, grid=grid)
