"""PPO training loop with per-epoch sample dropout.

Each update collects ``actors * horizon`` transitions with a frozen snapshot,
annotates them with GAE once, then runs ``epochs`` passes of shuffled
minibatch Adam steps. After every pass the surrogate values of the live set
are recomputed under the current parameters and the configured dropout
shrinks the live set for the next pass. With dropout off this is plain PPO.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adam import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .dropout import apply_dropout, phi_values
from .envs import make_env
from .errors import ConfigError
from .network import NetworkArchitecture, ParameterVector, PolicySnapshot, forward, init_params
from .objective import loss_and_gradient, ratios, surrogate_values
from .rollout import ActorPool, EpisodeStats, TrajectoryBatch, collect, gae_annotate
from .variance import empirical_variance

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "global_step",
    "update",
    "epoch",
    "mean_return",
    "surrogate_variance",
    "policy_loss",
    "value_loss",
    "entropy",
    "kept_count",
    "dropped_phi_pos_mean",
    "dropped_phi_neg_mean",
    "lr",
)


@dataclass(frozen=True)
class UpdateRecord:
    global_step: int
    update_index: int
    epoch_index: int
    mean_return: float | None
    surrogate_variance: float
    policy_loss: float | None
    value_loss: float | None
    entropy: float | None
    kept_count: int
    dropped_phi_pos_mean: float | None
    dropped_phi_neg_mean: float | None
    lr: float
    adam_steps: int = 0

    def row(self) -> list[str]:
        vals = (
            self.global_step, self.update_index, self.epoch_index, self.mean_return,
            self.surrogate_variance, self.policy_loss, self.value_loss, self.entropy,
            self.kept_count, self.dropped_phi_pos_mean, self.dropped_phi_neg_mean, self.lr,
        )
        return [_cell(v) for v in vals]


def _cell(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def lr_schedule(step: int, total_steps: int, lr0: float) -> float:
    """Linear decay from ``lr0`` at step 0 to zero at ``total_steps``."""
    if total_steps <= 0:
        return 0.0
    return max(lr0 * (1.0 - step / total_steps), 0.0)


def _mean(values) -> float | None:
    return float(np.mean(values)) if values else None


def run_update(
    params: ParameterVector,
    adam: AdamState,
    batch: TrajectoryBatch,
    config: TrainConfig,
    lr: float,
    rng: np.random.Generator,
    update_index: int = 0,
    global_step: int = 0,
    mean_return: float | None = None,
):
    """One update: ``epochs`` passes over a shrinking live set.

    Returns ``(params, adam, records)`` with one :class:`UpdateRecord` per
    epoch.
    """
    if not batch.annotated:
        raise ConfigError("batch must be annotated with gae_annotate before run_update")
    n = len(batch)
    everything = np.arange(n)
    live = everything.copy()
    records = []
    for epoch in range(config.epochs):
        # variance metric: full collected batch, current parameters, before updates
        sur_all = surrogate_values(ratios(params, batch, everything), batch.advantages)
        variance = empirical_variance(sur_all)

        order = rng.permutation(live)
        losses = []
        steps = 0
        for k, start in enumerate(range(0, order.size, config.minibatch_size)):
            mb = order[start : start + config.minibatch_size]
            breakdown, grad = loss_and_gradient(
                params, batch, mb, config.clip_epsilon, config.c1, config.c2,
                config.advantage_normalization, minibatch_index=k,
            )
            params, adam = adam_step(params, grad, adam, lr)
            losses.append(breakdown)
            steps += 1
        if not steps:
            log.warning("update %d epoch %d: live set is empty, skipping", update_index, epoch)

        last = epoch == config.epochs - 1
        pos_mean = neg_mean = None
        if config.dropout.mode != "off" and live.size and not (last and config.skip_final_dropout):
            # advantages stay fixed from collection; ratios use current params
            sur_live = surrogate_values(ratios(params, batch, live), batch.advantages[live])
            report = apply_dropout(live, phi_values(sur_live), config.dropout)
            pos_mean, neg_mean = report.dropped_phi_pos_mean, report.dropped_phi_neg_mean
            live = report.kept_indices
            if live.size == 0 and not last:
                log.warning("update %d epoch %d: dropout removed every sample", update_index, epoch)
        records.append(UpdateRecord(
            global_step=global_step,
            update_index=update_index,
            epoch_index=epoch,
            mean_return=mean_return,
            surrogate_variance=variance,
            policy_loss=_mean([b.policy_loss for b in losses]),
            value_loss=_mean([b.value_loss for b in losses]),
            entropy=_mean([b.entropy for b in losses]),
            kept_count=int(live.size),
            dropped_phi_pos_mean=pos_mean,
            dropped_phi_neg_mean=neg_mean,
            lr=lr,
            adam_steps=steps,
        ))
    return params, adam, records


@dataclass
class RunResult:
    run_dir: Path | None
    params: ParameterVector
    adam: AdamState
    records: list = field(default_factory=list)
    returns: list = field(default_factory=list)
    best_rolling_mean: float | None = None
    updates: int = 0


def _architecture(config: TrainConfig, env) -> NetworkArchitecture:
    return NetworkArchitecture(
        env.spec.observation_dim, config.trunk, env.spec.action_count, config.activation
    )


def metrics_csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def train(config: TrainConfig, out_dir=None) -> RunResult:
    """Collect / annotate / update until ``total_steps`` transitions are used.

    With ``out_dir`` set, writes ``config.resolved``, ``metrics.csv`` (one row
    per epoch), ``checkpoints/ckpt_<update>.bin`` every ``checkpoint_every``
    updates and at the end, and ``final_report.txt``.
    """
    if not config.env_id:
        raise ConfigError("env_id is required (e.g. cartpole, chain:5, randmdp:4x2:0)", key="env_id")
    envs = [make_env(config.env_id) for _ in range(config.actors)]
    arch = _architecture(config, envs[0])
    init_seq, actor_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(3)
    params = init_params(arch, int(init_seq.generate_state(1, np.uint64)[0]))
    adam = AdamState.zeros(arch.param_count)
    stats = EpisodeStats(window=config.return_window)
    pool = ActorPool(envs, int(actor_seq.generate_state(1, np.uint64)[0]), stats)
    shuffle_rng = np.random.default_rng(shuffle_seq)

    run_dir = ckpt_dir = metrics_fh = writer = None
    if out_dir is not None:
        run_dir = Path(out_dir)
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.resolved").write_text(config.resolved_text())
        metrics_fh = open(run_dir / "metrics.csv", "w", newline="")
        writer = csv.writer(metrics_fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)

    result = RunResult(run_dir, params, adam)
    global_step = 0
    update = 0
    best = None
    try:
        while global_step < config.total_steps:
            if config.lr_decay == "linear":
                lr = lr_schedule(global_step, config.total_steps, config.lr0)
            else:
                lr = config.lr0
            batch = collect(PolicySnapshot.of(params), pool, config.horizon)
            gae_annotate(batch, config.gae_lambda, config.gamma)
            global_step += len(batch)
            mean_return = stats.rolling_mean() if stats.returns else None
            if mean_return is not None and (best is None or mean_return > best):
                best = mean_return
            params, adam, records = run_update(
                params, adam, batch, config, lr, shuffle_rng,
                update_index=update, global_step=global_step, mean_return=mean_return,
            )
            update += 1
            result.records.extend(records)
            if writer is not None:
                for rec in records:
                    writer.writerow(rec.row())
                metrics_fh.flush()
                if update % config.checkpoint_every == 0:
                    save_checkpoint(ckpt_dir / f"ckpt_{update}.bin", params, adam)
            log.info(
                "update %d step %d return %s var %.4g kept %d",
                update, global_step, mean_return, records[0].surrogate_variance,
                records[-1].kept_count,
            )
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    result.params, result.adam = params, adam
    result.updates = update
    result.returns = list(stats.returns)
    result.best_rolling_mean = best
    if run_dir is not None:
        if update % config.checkpoint_every != 0:
            save_checkpoint(ckpt_dir / f"ckpt_{update}.bin", params, adam)
        (run_dir / "final_report.txt").write_text(final_report(config, result))
    return result


def final_report(config: TrainConfig, result: RunResult) -> str:
    recs = result.records
    tail = recs[int(len(recs) * 0.8):] if recs else []
    tail_var = float(np.mean([r.surrogate_variance for r in tail])) if tail else float("nan")
    last_ret = recs[-1].mean_return if recs else None
    lines = [
        f"env_id = {config.env_id}",
        f"dropout_mode = {config.dropout.mode}",
        f"dropout_r = {config.dropout.r!r}",
        f"seed = {config.seed}",
        f"updates = {result.updates}",
        f"total_steps = {result.updates * config.batch_size}",
        f"episodes = {len(result.returns)}",
        f"final_rolling_mean_return = {_cell(last_ret)}",
        f"best_rolling_mean_return = {_cell(result.best_rolling_mean)}",
        f"tail_mean_surrogate_variance = {tail_var!r}",
    ]
    return "\n".join(lines) + "\n"


def greedy_action(logits: np.ndarray, rng: np.random.Generator) -> int:
    """Argmax with ties broken uniformly at random."""
    best = np.flatnonzero(logits == logits.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def evaluate(checkpoint, env_id: str, episodes: int, seed: int):
    """Greedy rollouts of a saved policy. Returns ``(mean_return, returns)``."""
    if episodes < 1:
        raise ConfigError(f"episodes must be >= 1, got {episodes}", key="episodes")
    params, _ = load_checkpoint(checkpoint)
    return evaluate_params(params, env_id, episodes, seed)


def evaluate_params(params: ParameterVector, env_id: str, episodes: int, seed: int):
    env = make_env(env_id)
    arch = params.architecture
    if arch.input_dim != env.spec.observation_dim or arch.action_count != env.spec.action_count:
        raise ConfigError(
            f"checkpoint expects {arch.input_dim} inputs / {arch.action_count} actions, "
            f"environment {env_id!r} has {env.spec.observation_dim} / {env.spec.action_count}"
        )
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        obs = env.reset(int(rng.integers(0, 2**63)))
        total = 0.0
        done = False
        while not done:
            logits, _ = forward(params, obs)
            obs, r, done = env.step(greedy_action(logits[0], rng))
            total += r
        returns.append(total)
    return float(np.mean(returns)), returns
