"""Experiment loop, metrics, scenario tables, heatmap grids."""

import numpy as np
import pytest

from fedhazard.client import LocalTrainConfig
from fedhazard.datagen import GROUND_TRUTH_BETA, GeneratorConfig, UserDataset, build_population
from fedhazard.harness import (
    ExperimentConfig,
    beta_mae,
    eval_round_nll,
    heatmap_grid,
    run_experiment,
    scenario_probs,
)
from fedhazard.hazard import (
    CoefMatrix,
    Covariates,
    DeteriorationState,
    TransitionKind,
    TransitionPair,
)
from fedhazard.server import ServerConfig

LEARNED_BETA = CoefMatrix(
    [
        [-1.273, -0.207, -0.526, -0.187],
        [-2.666, -1.302, -1.510, -1.283],
        [-1.212, -0.599, -0.617, -0.462],
    ]
)


def small_config(users=40, rounds=6, seed=3):
    return ExperimentConfig(
        generator=GeneratorConfig(user_count=users, seed=seed),
        server=ServerConfig(rounds=rounds, seed=seed),
        client=LocalTrainConfig(),
    )


class TestEvalRoundNll:
    def test_single_stay_pair_zero_beta(self):
        pair = TransitionPair(DeteriorationState.GOOD, DeteriorationState.GOOD, 1.0,
                              Covariates(0.2, 0.8, 0.1))
        user = UserDataset(0, "coastal", CoefMatrix.zero(), [pair])
        assert eval_round_nll(CoefMatrix.zero(), [user]) == 2.0

    def test_duplicate_participants_do_not_change_value(self):
        pop = build_population(GeneratorConfig(user_count=3, seed=1))
        one = eval_round_nll(CoefMatrix.zero(), [pop[0]])
        twice = eval_round_nll(CoefMatrix.zero(), [pop[0], pop[0]])
        assert twice == pytest.approx(one, rel=1e-12)

    def test_no_pairs_raises(self):
        empty = UserDataset(0, "inland", CoefMatrix.zero(), [])
        with pytest.raises(ValueError):
            eval_round_nll(CoefMatrix.zero(), [empty])


class TestBetaMae:
    def test_identical_matrices_give_zero(self):
        per, overall = beta_mae(GROUND_TRUTH_BETA, GROUND_TRUTH_BETA)
        assert overall == 0.0 and all(v == 0.0 for v in per.values())

    def test_reference_error_table_row(self):
        per, _ = beta_mae(LEARNED_BETA, GROUND_TRUTH_BETA)
        # (0.727 + 0.707 + 0.226 + 0.287) / 4, from the published error column
        assert per["0->1"] == pytest.approx(0.48675, abs=1e-10)

    def test_overall_invariant_to_consistent_permutation(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=12)
        b = rng.normal(size=12)
        perm = rng.permutation(12)
        _, o1 = beta_mae(CoefMatrix.from_flat(a), CoefMatrix.from_flat(b))
        _, o2 = beta_mae(CoefMatrix.from_flat(a[perm]), CoefMatrix.from_flat(b[perm]))
        assert o1 == pytest.approx(o2, rel=1e-14)


class TestScenarioProbs:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            beta = CoefMatrix.from_flat(rng.uniform(-5, 2, 12))
            t = scenario_probs(beta, Covariates(*rng.uniform(0, 1, 3)), float(rng.uniform(0.1, 8)))
            assert abs(sum(t["state0"]) - 1.0) < 1e-12
            assert abs(sum(t["state1"]) - 1.0) < 1e-12

    def test_published_scenario_tables(self):
        t = scenario_probs(LEARNED_BETA, Covariates(0.2, 0.8, 0.1), 3.0)
        assert t["state0"] == pytest.approx((0.570, 0.398, 0.032), abs=1e-3)
        assert t["state1"] == pytest.approx((0.630, 0.370), abs=1e-3)
        t = scenario_probs(LEARNED_BETA, Covariates(0.5, 0.3, 0.5), 3.0)
        assert t["state0"] == pytest.approx((0.535, 0.438, 0.027), abs=1e-3)

    def test_short_interval_limit(self):
        t = scenario_probs(LEARNED_BETA, Covariates(0.4, 0.4, 0.4), 1e-9)
        assert t["state0"][0] == pytest.approx(1.0, abs=1e-6)
        assert t["state1"][0] == pytest.approx(1.0, abs=1e-6)
        assert t["state0"][1] < 1e-6 and t["state0"][2] < 1e-6


class TestHeatmapGrid:
    def test_zero_beta_grid_is_constant(self):
        grid = heatmap_grid(CoefMatrix.zero(), TransitionKind.GOOD_TO_MINOR, (1, 2),
                            resolution=7, dt=3.0)
        assert grid.shape == (7, 7)
        assert np.allclose(grid, grid[0, 0])

    def test_ground_truth_monotonicity_along_axes(self):
        grid = heatmap_grid(GROUND_TRUTH_BETA, TransitionKind.GOOD_TO_MINOR, (1, 2),
                            resolution=12, dt=3.0)
        assert np.all(np.diff(grid, axis=1) > 0)  # increases with age (x)
        assert np.all(np.diff(grid, axis=0) < 0)  # attenuated by sea distance (y)

    def test_lattice_point_cross_checks_scenario(self):
        grid = heatmap_grid(LEARNED_BETA, TransitionKind.GOOD_TO_MINOR, (1, 2),
                            fixed_value=0.5, resolution=11, dt=3.0)
        t = scenario_probs(LEARNED_BETA, Covariates(0.5, 0.3, 0.5), 3.0)
        assert grid[3, 5] == t["state0"][1]  # x=0.5 (idx 5), y=0.3 (idx 3)

    def test_rejects_bad_var_pair_and_resolution(self):
        with pytest.raises(ValueError):
            heatmap_grid(CoefMatrix.zero(), TransitionKind.GOOD_TO_MINOR, (1, 1))
        with pytest.raises(ValueError):
            heatmap_grid(CoefMatrix.zero(), TransitionKind.GOOD_TO_MINOR, (0, 2))
        with pytest.raises(ValueError):
            heatmap_grid(CoefMatrix.zero(), TransitionKind.GOOD_TO_MINOR, (1, 2), resolution=1)


class TestRunExperiment:
    def test_zero_rounds_returns_initial_state(self):
        cfg = small_config(rounds=0)
        res = run_experiment(cfg)
        assert res.metrics == []
        assert np.all(res.final_beta.flat() == 0.0)

    def test_metrics_shape_and_invariants(self):
        cfg = small_config()
        res = run_experiment(cfg)
        assert len(res.metrics) == cfg.server.rounds
        for i, row in enumerate(res.metrics, start=1):
            assert row.round == i
            assert row.avg_nll >= 0.0 and row.agg_grad_norm >= 0.0
            assert row.participant_count >= 1 and row.sample_count >= 1

    def test_identical_runs_are_identical_except_wall(self):
        a = run_experiment(small_config())
        b = run_experiment(small_config())
        assert a.final_beta == b.final_beta
        for ra, rb in zip(a.metrics, b.metrics):
            assert ra.avg_nll == rb.avg_nll
            assert ra.agg_grad_norm == rb.agg_grad_norm
            assert np.array_equal(ra.beta_snapshot, rb.beta_snapshot)
            assert (ra.participant_count, ra.sample_count) == (rb.participant_count, rb.sample_count)

    def test_resume_from_snapshot_matches_full_run(self):
        pop = build_population(GeneratorConfig(user_count=40, seed=3))
        full = run_experiment(small_config(rounds=8), population=pop)
        head = run_experiment(small_config(rounds=4), population=pop)
        tail = run_experiment(small_config(rounds=8), population=pop,
                              resume_from=head.final_state)
        assert [r.round for r in tail.metrics] == [5, 6, 7, 8]
        assert tail.final_beta == full.final_beta
        for ra, rb in zip(tail.metrics, full.metrics[4:]):
            assert ra.avg_nll == rb.avg_nll and ra.agg_grad_norm == rb.agg_grad_norm

    def test_parallel_workers_match_sequential(self):
        pop = build_population(GeneratorConfig(user_count=40, seed=3))
        seq = run_experiment(small_config(), population=pop)
        par_cfg = ExperimentConfig(
            generator=GeneratorConfig(user_count=40, seed=3),
            server=ServerConfig(rounds=6, seed=3),
            client=LocalTrainConfig(),
            workers=4,
        )
        par = run_experiment(par_cfg, population=pop)
        assert par.final_beta == seq.final_beta

    def test_all_empty_round_leaves_state_unchanged(self, caplog):
        users = [UserDataset(i, "inland", CoefMatrix.zero(), []) for i in range(5)]
        cfg = ExperimentConfig(
            generator=GeneratorConfig(user_count=5, seed=1),
            server=ServerConfig(rounds=2, participation_fraction=1.0, seed=1),
        )
        import logging

        with caplog.at_level(logging.WARNING):
            res = run_experiment(cfg, population=users)
        assert np.all(res.final_beta.flat() == 0.0)
        assert len(res.metrics) == 2
        assert all(r.participant_count == 0 for r in res.metrics)
        assert "empty" in caplog.text

    def test_metrics_file_written_incrementally(self, tmp_path):
        path = tmp_path / "metrics.csv"
        cfg = ExperimentConfig(
            generator=GeneratorConfig(user_count=30, seed=2),
            server=ServerConfig(rounds=3, seed=2),
            metrics_path=str(path),
        )
        res = run_experiment(cfg)
        from fedhazard.storage import load_metrics

        rows = load_metrics(str(path))
        assert len(rows) == 3
        assert rows[-1].avg_nll == res.metrics[-1].avg_nll
