import logging

import numpy as np
import pytest

from dppo.adam import AdamState
from dppo.config import TrainConfig, build_config
from dppo.dropout import DropoutConfig
from dppo.envs import CartPole, chain_mdp, enumerate_tables
from dppo.errors import ConfigError
from dppo.network import NetworkArchitecture, ParameterVector, PolicySnapshot, init_params
from dppo.rollout import ActorPool, collect, gae_annotate
from dppo.trainer import (
    METRIC_COLUMNS,
    evaluate,
    evaluate_params,
    greedy_action,
    lr_schedule,
    run_update,
    train,
)


def test_lr_schedule():
    assert lr_schedule(0, 1000, 2.5e-4) == 2.5e-4
    assert lr_schedule(1000, 1000, 2.5e-4) == 0.0
    assert lr_schedule(500, 1000, 2.5e-4) == pytest.approx(1.25e-4)
    assert lr_schedule(2000, 1000, 2.5e-4) == 0.0


@pytest.fixture(scope="module")
def full_batch():
    arch = NetworkArchitecture(4, (64, 64), 2)
    params = init_params(arch, 0)
    pool = ActorPool([CartPole() for _ in range(8)], 0)
    batch = gae_annotate(collect(PolicySnapshot.of(params), pool, 256), 0.95, 0.99)
    return params, batch


def _update(params, batch, **kw):
    cfg = build_config({"env_id": "cartpole", **kw})
    return run_update(params, AdamState.zeros(len(params)), batch, cfg, 2.5e-4,
                      np.random.default_rng(0))


def test_ppo_mode_step_count(full_batch):
    params, batch = full_batch
    assert len(batch) == 2048
    _, adam, recs = _update(params, batch, **{"dropout.mode": "off"})
    assert adam.step_count == 16
    assert [r.adam_steps for r in recs] == [4, 4, 4, 4]
    assert all(r.kept_count == 2048 for r in recs)


def test_ratio_mode_shrinks_geometrically(full_batch):
    params, batch = full_batch
    _, adam, recs = _update(params, batch, **{"dropout.r": 0.2})
    prev = 2048
    for r in recs:
        # two partitions, each within [r - 1/m, r + 2/m] of its own size
        assert abs(r.kept_count - 0.8 * prev) <= 4, (r.kept_count, prev)
        assert r.kept_count < prev
        prev = r.kept_count
    steps = [r.adam_steps for r in recs]
    expected = [4] + [-(-recs[i].kept_count // 512) for i in range(3)]
    assert steps == expected
    assert adam.step_count == sum(steps)
    assert recs[0].dropped_phi_pos_mean is not None


def test_zero_advantages_keep_everything(full_batch, caplog):
    params, batch = full_batch
    zero = type(batch)(**{**batch.__dict__, "advantages": np.zeros(len(batch))})
    with caplog.at_level(logging.WARNING):
        _, _, recs = _update(params, zero)
    assert all(r.kept_count == 2048 for r in recs)
    assert "keeping the partition" in caplog.text


def test_unannotated_batch_rejected(full_batch):
    params, batch = full_batch
    raw = type(batch)(**{**batch.__dict__, "advantages": None, "value_targets": None})
    with pytest.raises(ConfigError):
        _update(params, raw)


def small_config(**kw):
    values = {"env_id": "cartpole", "actors": 2, "horizon": 32, "minibatch_size": 16,
              "total_steps": 256, "trunk": (16,), "checkpoint_every": 3}
    values.update(kw)
    return build_config(values)


def test_train_requires_env():
    with pytest.raises(ConfigError):
        train(TrainConfig())


def test_single_update_when_total_equals_batch():
    res = train(small_config(total_steps=64))
    assert res.updates == 1
    assert len(res.records) == 4


def test_run_directory_contents(tmp_path):
    res = train(small_config(), tmp_path / "run")
    run = tmp_path / "run"
    assert res.updates == 4
    lines = (run / "metrics.csv").read_text().splitlines()
    assert lines[0] == ",".join(METRIC_COLUMNS)
    assert len(lines) == 1 + 16
    assert sorted(p.name for p in (run / "checkpoints").iterdir()) == ["ckpt_3.bin", "ckpt_4.bin"]
    assert "dropout.r = 0.2" in (run / "config.resolved").read_text()
    assert "updates = 4" in (run / "final_report.txt").read_text()


def test_metrics_follow_update_contract(tmp_path):
    res = train(small_config(total_steps=320))
    cfg = small_config(total_steps=320)
    by_update = {}
    for r in res.records:
        by_update.setdefault(r.update_index, []).append(r)
    for u, recs in by_update.items():
        # lr fixed within an update, evaluated before it
        assert {r.lr for r in recs} == {lr_schedule(u * 64, 320, cfg.lr0)}
        counts = [r.kept_count for r in recs]
        assert counts == sorted(counts, reverse=True)
        assert recs[0].adam_steps == 4  # full batch of 64 in minibatches of 16


def test_training_is_deterministic(tmp_path):
    train(small_config(), tmp_path / "a")
    train(small_config(), tmp_path / "b")
    assert (tmp_path / "a/metrics.csv").read_bytes() == (tmp_path / "b/metrics.csv").read_bytes()
    a = (tmp_path / "a/checkpoints/ckpt_4.bin").read_bytes()
    assert a == (tmp_path / "b/checkpoints/ckpt_4.bin").read_bytes()


def test_seed_changes_run():
    a = train(small_config(seed=1)).records
    b = train(small_config(seed=2)).records
    assert [r.row() for r in a] != [r.row() for r in b]


def test_empty_cells_for_absent_statistics():
    # no chain:6 episode can finish within 4 steps
    res = train(small_config(env_id="chain:6", horizon=4, minibatch_size=4, total_steps=8,
                             **{"dropout.mode": "off"}))
    row = res.records[0].row()
    assert row[METRIC_COLUMNS.index("mean_return")] == ""
    assert row[METRIC_COLUMNS.index("dropped_phi_pos_mean")] == ""


# -- evaluation -----------------------------------------------------------------


def test_greedy_tie_break_is_uniform():
    rng = np.random.default_rng(0)
    picks = [greedy_action(np.zeros(3), rng) for _ in range(3000)]
    counts = np.bincount(picks, minlength=3)
    assert np.all(np.abs(counts - 1000) < 100)
    assert greedy_action(np.array([0.0, 2.0, 1.0]), rng) == 1


def test_zero_policy_on_chain_matches_uniform_baseline():
    arch = NetworkArchitecture(5, (8,), 2)
    params = ParameterVector(np.zeros(arch.param_count), arch)
    mdp = chain_mdp(5)
    v0 = enumerate_tables(mdp, np.full((5, 2), 0.5), discount=1.0).v_values[0]
    mean, returns = evaluate_params(params, "chain:5", 4000, seed=0)
    se = np.std(returns, ddof=1) / np.sqrt(len(returns))
    assert abs(mean - v0) < 4 * se, (mean, v0, se)


def test_eval_repeatable(tmp_path):
    train(small_config(total_steps=64), tmp_path / "r")
    ckpt = tmp_path / "r/checkpoints/ckpt_1.bin"
    assert evaluate(ckpt, "cartpole", 1, seed=3) == evaluate(ckpt, "cartpole", 1, seed=3)
    with pytest.raises(ConfigError):
        evaluate(ckpt, "chain:5", 1, seed=0)
