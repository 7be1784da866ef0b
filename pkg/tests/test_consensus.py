import numpy as np
import pytest

from supportsel.learners import fit, lr_spec, svm_spec, knn_spec, rf_spec
from supportsel.selection import (PipelineConfig, SelectionError, consensus_cv,
                                  consensus_predict, cross_validate, grid_search)
from supportsel.survey import binarize


def constant_model(label, n_features=3):
    """Degenerate single-class fit: a deterministic constant voter."""
    X = np.zeros((2, n_features))
    y = np.full(2, label, dtype=np.int8)
    return fit(lr_spec(), X, y, seed=0)


def test_strict_majority():
    models = [constant_model(1), constant_model(1), constant_model(0)]
    assert consensus_predict(models, np.zeros(3)) == 1


def test_unanimity():
    for label in (0, 1):
        models = [constant_model(label)] * 3
        assert consensus_predict(models, np.zeros(3)) == label


def test_two_two_tie_goes_to_best_ccr_member():
    models = [constant_model(1), constant_model(1), constant_model(0), constant_model(0)]
    # best individual CCR belongs to a member predicting 0
    assert consensus_predict(models, np.zeros(3), member_ccrs=[0.8, 0.7, 0.95, 0.6]) == 0
    # and symmetrically for a member predicting 1
    assert consensus_predict(models, np.zeros(3), member_ccrs=[0.99, 0.7, 0.95, 0.6]) == 1


def test_tie_among_equal_best_members_is_label_zero():
    models = [constant_model(1), constant_model(0)]
    assert consensus_predict(models, np.zeros(3), member_ccrs=[0.9, 0.9]) == 0


def test_tie_without_ccrs_is_label_zero():
    models = [constant_model(1), constant_model(0)]
    assert consensus_predict(models, np.zeros(3)) == 0


def test_odd_voter_count_never_ties(rng):
    # with an odd member count the modal label always has a strict majority,
    # so the recorded-CCR rule is irrelevant: poisoned CCRs must not matter
    for _ in range(20):
        labels = rng.integers(0, 2, size=5)
        models = [constant_model(int(v)) for v in labels]
        with_ccrs = consensus_predict(models, np.zeros(3),
                                      member_ccrs=rng.random(5).tolist())
        without = consensus_predict(models, np.zeros(3))
        majority = int(labels.sum() * 2 > 5)
        assert with_ccrs == without == majority


def test_consensus_needs_two_models():
    with pytest.raises(SelectionError):
        consensus_predict([constant_model(1)], np.zeros(3))


def test_consensus_rejects_mixed_dimensions():
    with pytest.raises(SelectionError, match="dimensionality"):
        consensus_predict([constant_model(1, 3), constant_model(0, 4)], np.zeros(3))


def test_consensus_of_identical_members_equals_member(planted):
    dataset, _ = planted
    target = dataset.active_targets[1]
    config = PipelineConfig(1, False, knn_spec(5))
    view = binarize(dataset, 1, False)
    single = cross_validate(config, view, target, seed=6)
    combined = consensus_cv(dataset, target, [config, config, config], seed=6)
    assert combined.mean_ccr == pytest.approx(single.mean_ccr, abs=1e-12)
    assert combined.per_fold_ccr == pytest.approx(single.per_fold_ccr, abs=1e-12)


def test_consensus_cv_requires_shared_threshold_and_encoding(planted):
    dataset, _ = planted
    members = [PipelineConfig(1, False, lr_spec()), PipelineConfig(4, False, knn_spec(5))]
    with pytest.raises(SelectionError, match="share threshold"):
        consensus_cv(dataset, dataset.active_targets[0], members, seed=0)
    members = [PipelineConfig(1, False, lr_spec()), PipelineConfig(1, True, knn_spec(5))]
    with pytest.raises(SelectionError, match="share threshold"):
        consensus_cv(dataset, dataset.active_targets[0], members, seed=0)


def test_consensus_cv_rejects_nested_consensus(planted):
    dataset, _ = planted
    members = [PipelineConfig(1, False, lr_spec()),
               PipelineConfig(1, False, None, use_consensus=True)]
    with pytest.raises(SelectionError, match="plain"):
        consensus_cv(dataset, dataset.active_targets[0], members, seed=0)


def test_consensus_result_is_labeled_with_lead_member(planted):
    dataset, _ = planted
    target = dataset.active_targets[0]
    members = [
        PipelineConfig(1, False, rf_spec(10)),
        PipelineConfig(1, False, knn_spec(5)),
        PipelineConfig(1, False, svm_spec("linear")),
        PipelineConfig(1, False, lr_spec()),
    ]
    view = binarize(dataset, 1, False)
    individual = {
        c.key(): cross_validate(c, view, target, seed=8).mean_ccr for c in members
    }
    result = consensus_cv(dataset, target, members, seed=8)
    assert result.best_config.use_consensus
    lead_key = result.best_config.key().replace("cons=yes", "cons=no")
    assert individual[lead_key] == max(individual.values())
    recorded = {m["config"]: m["mean_ccr"] for m in result.diagnostics["consensus_members"]}
    assert recorded == individual


def test_grid_consensus_equals_refitting_consensus_cv(planted):
    """The cached-prediction consensus inside grid_search must equal the
    refit-every-member consensus_cv path bit for bit."""
    dataset, _ = planted
    target = dataset.active_targets[2]
    seed = 13
    members = [
        PipelineConfig(1, False, rf_spec(10)),
        PipelineConfig(1, False, knn_spec(5)),
        PipelineConfig(1, False, svm_spec("linear")),
        PipelineConfig(1, False, lr_spec()),
    ]
    direct = consensus_cv(dataset, target, members, seed=seed)
    grid = members + [PipelineConfig(1, False, None, use_consensus=True)]
    searched = grid_search(dataset, target, grid, seed=seed)
    cached_score = searched.diagnostics["grid_scores"][direct.best_config.key()]
    assert cached_score == direct.mean_ccr


def test_consensus_never_below_majority_of_members(planted_noisy):
    dataset, _ = planted_noisy
    target = dataset.active_targets[1]
    members = [
        PipelineConfig(1, False, rf_spec(20)),
        PipelineConfig(1, False, knn_spec(5)),
        PipelineConfig(1, False, svm_spec("linear")),
        PipelineConfig(1, False, lr_spec()),
    ]
    view = binarize(dataset, 1, False)
    member_ccrs = [cross_validate(c, view, target, seed=2).mean_ccr for c in members]
    combined = consensus_cv(dataset, target, members, seed=2)
    assert combined.mean_ccr >= min(member_ccrs) - 0.02
