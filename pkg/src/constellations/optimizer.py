"""Sphere-constrained Adam training of paired (and multi-set) embeddings with
trainable inverse temperature, bias or relative bias, and an optional locked
adapter pair. Deterministic given the seed; pure numpy."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constructions import MultiModalConfig, SynchronizationGraph
from .errors import ConfigError, DivergenceDetected
from .geometry import EmbeddingSet, PairedConfig, gram_stats, trimmed_stats, unit_rows
from .losses import Parameterization, softplus, _sigmoid

_BETA1 = 0.9
_BETA2 = 0.999
_EPS = 1e-8


@dataclass(frozen=True)
class TrainableFlags:
    embeddings_u: bool = True
    embeddings_v: bool = True
    log_inv_temp: bool = True
    bias: bool = True
    adapter_delta: bool = False


@dataclass(frozen=True)
class TrainConfig:
    dim: int
    count: int
    modality_count: int = 2
    graph: Optional[SynchronizationGraph] = None
    parameterization: Parameterization = Parameterization.REL_BIAS
    trainable: TrainableFlags = field(default_factory=TrainableFlags)
    t0: float = 10.0
    b0: float = 0.0
    delta0: float = float(1.0 / (1.0 + np.exp(-0.5)))
    lr: float = 0.01
    iterations: int = 10000
    seed: int = 0
    batch: Optional[int] = None
    record_every: int = 100

    def __post_init__(self):
        if self.lr <= 0 or self.iterations < 1 or self.t0 <= 0:
            raise ConfigError("need lr > 0, iterations >= 1, t0 > 0")
        if self.dim < 1 or self.count < 1 or self.modality_count < 2:
            raise ConfigError("need dim >= 1, count >= 1, modality_count >= 2")
        if self.batch is not None and not (2 <= self.batch <= self.count):
            raise ConfigError(f"batch must satisfy 2 <= B <= N, got {self.batch}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")


@dataclass(frozen=True)
class TrainTrace:
    """Recorded history plus the final state of a run.

    loss_history has one entry per iteration; the remaining arrays are sampled
    every record_every steps (final step always included).
    """

    loss_history: np.ndarray
    steps: np.ndarray
    loss: np.ndarray
    inv_temp: np.ndarray
    rel_bias: np.ndarray
    opt_margin: np.ndarray
    opt_rel_bias: np.ndarray
    final: object
    final_loss: float
    final_t: float
    final_rel_bias: float
    delta: Optional[np.ndarray] = None
    deadapted_margin: Optional[np.ndarray] = None
    final_delta: Optional[float] = None

    def iterations_to(self, threshold: float) -> Optional[int]:
        """First iteration whose loss drops below threshold, or None."""
        below = np.nonzero(self.loss_history < threshold)[0]
        return int(below[0]) if below.size else None

    @property
    def final_pair(self) -> PairedConfig:
        if isinstance(self.final, PairedConfig):
            return self.final
        return self.final.pair(0, 1)


class _Adam:
    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def update(self, grad, lr, step):
        self.m = _BETA1 * self.m + (1 - _BETA1) * grad
        self.v = _BETA2 * self.v + (1 - _BETA2) * grad * grad
        mhat = self.m / (1 - _BETA1 ** step)
        vhat = self.v / (1 - _BETA2 ** step)
        return lr * mhat / (np.sqrt(vhat) + _EPS)


def _loss_core(gram, t, b):
    """Loss, dL/dGram, dL/dt and dL/db for one gram block.

    Diagonal terms use softplus(-t g + b), off-diagonal softplus(t g - b).
    """
    z = t * gram - b
    np.fill_diagonal(z, -np.diagonal(z))
    loss = float(np.sum(softplus(z)))
    sig = _sigmoid(z)
    w = t * sig
    np.fill_diagonal(w, -np.diagonal(w))
    gsign = gram.copy()
    np.fill_diagonal(gsign, -np.diagonal(gsign))
    dt = float(np.sum(sig * gsign))
    diag_sig = float(np.sum(np.diagonal(sig)))
    db = diag_sig - (float(np.sum(sig)) - diag_sig)
    return loss, w, dt, db


def _edge_stats(mats, edges):
    """Worst-edge extremal margin and its midpoint across the graph."""
    best = None
    for a, c in edges:
        stats = gram_stats(PairedConfig(EmbeddingSet(mats[a]), EmbeddingSet(mats[c])))
        if best is None or stats.opt_margin < best.opt_margin:
            best = stats
    return best


def _final_object(mats):
    if len(mats) == 2:
        return PairedConfig(EmbeddingSet(mats[0]), EmbeddingSet(mats[1]))
    return MultiModalConfig(tuple(EmbeddingSet(m) for m in mats))


def _run(config: TrainConfig, use_adapter: bool) -> TrainTrace:
    k = config.modality_count
    if use_adapter and k != 2:
        raise ConfigError("the explicit adapter run supports exactly 2 modalities")
    if use_adapter and config.parameterization is not Parameterization.REL_BIAS:
        raise ConfigError("the explicit adapter run requires the relative-bias form")
    n, d = config.count, config.dim
    graph = config.graph or (
        SynchronizationGraph(2, ((0, 1),)) if k == 2 else SynchronizationGraph.complete(k)
    )
    if graph.k != k:
        raise ConfigError(f"graph has k={graph.k}, config has k={k}")
    rng = np.random.default_rng(config.seed)
    mats = []
    for _ in range(k):
        m = rng.standard_normal((n, d))
        m /= np.linalg.norm(m, axis=1)[:, None]
        mats.append(m)

    tp = float(np.log(config.t0))
    b_param = float(config.b0)  # raw bias or rel_bias depending on parameterization
    rel = config.parameterization is Parameterization.REL_BIAS
    x_adapter = float(np.log(config.delta0 / (1.0 - config.delta0))) if use_adapter else 0.0

    tr = config.trainable
    emb_trainable = [tr.embeddings_u if j == 0 else tr.embeddings_v for j in range(k)]
    adam_mats = [_Adam((n, d)) if emb_trainable[j] else None for j in range(k)]
    adam_tp = _Adam(()) if tr.log_inv_temp else None
    adam_b = _Adam(()) if tr.bias else None
    adam_x = _Adam(()) if (use_adapter and tr.adapter_delta) else None

    loss_history = np.empty(config.iterations)
    rec_steps, rec_loss, rec_t, rec_rb = [], [], [], []
    rec_margin, rec_brel = [], []
    rec_delta, rec_deadapted = [], []

    for it in range(config.iterations):
        t = float(np.exp(tp))
        b = b_param * t if rel else b_param
        delta = float(1.0 / (1.0 + np.exp(-x_adapter))) if use_adapter else 1.0

        idx = None
        if config.batch is not None and config.batch < n:
            idx = rng.choice(n, size=config.batch, replace=False)

        grads = [np.zeros((n, d)) if emb_trainable[j] else None for j in range(k)]
        total_loss = 0.0
        dt_sum = 0.0
        db_sum = 0.0
        ddelta_sum = 0.0
        for a, c in graph.edges:
            ua = mats[a] if idx is None else mats[a][idx]
            vc = mats[c] if idx is None else mats[c][idx]
            gram = ua @ vc.T
            if use_adapter:
                gram_eff = delta * delta * gram - (1.0 - delta * delta)
            else:
                gram_eff = gram
            loss, w, dt, db = _loss_core(gram_eff, t, b)
            total_loss += loss
            dt_sum += dt
            db_sum += db
            scale = delta * delta if use_adapter else 1.0
            if emb_trainable[a]:
                g = scale * (w @ vc)
                if idx is None:
                    grads[a] += g
                else:
                    grads[a][idx] += g
            if emb_trainable[c]:
                g = scale * (w.T @ ua)
                if idx is None:
                    grads[c] += g
                else:
                    grads[c][idx] += g
            if use_adapter:
                ddelta_sum += float(np.sum(w * (2.0 * delta * (gram + 1.0))))

        if not np.isfinite(total_loss):
            raise DivergenceDetected(f"loss became non-finite at iteration {it}")
        loss_history[it] = total_loss

        step = it + 1
        if adam_tp is not None:
            g_tp = t * (dt_sum + b_param * db_sum) if rel else t * dt_sum
            tp -= float(adam_tp.update(g_tp, config.lr, step))
        if adam_b is not None:
            g_b = t * db_sum if rel else db_sum
            b_param -= float(adam_b.update(g_b, config.lr, step))
        if adam_x is not None:
            g_x = ddelta_sum * delta * (1.0 - delta)
            x_adapter -= float(adam_x.update(g_x, config.lr, step))
        for j in range(k):
            if adam_mats[j] is not None:
                mats[j] -= adam_mats[j].update(grads[j], config.lr, step)
                mats[j] /= np.linalg.norm(mats[j], axis=1)[:, None]

        if it % config.record_every == 0 or it == config.iterations - 1:
            t_now = float(np.exp(tp))
            b_now = b_param * t_now if rel else b_param
            stats = _edge_stats(mats, graph.edges)
            rec_steps.append(it)
            rec_loss.append(total_loss)
            rec_t.append(t_now)
            rec_rb.append(b_now / t_now)
            if use_adapter:
                d_now = float(1.0 / (1.0 + np.exp(-x_adapter)))
                d2 = d_now * d_now
                # the adapter acts affinely on inner products, so the adapted
                # stats follow from the raw ones in closed form
                rec_margin.append(d2 * stats.opt_margin)
                rec_brel.append(d2 * stats.opt_rel_bias - (1.0 - d2))
                rec_delta.append(d_now)
                rec_deadapted.append(stats.opt_margin)
            else:
                rec_margin.append(stats.opt_margin)
                rec_brel.append(stats.opt_rel_bias)

    # re-normalize defensively; float drift across 1e4 steps stays < 1e-12
    mats = [unit_rows(m).vectors for m in mats]
    final = _final_object(mats)
    t_final = float(np.exp(tp))
    b_final = b_param * t_final if rel else b_param
    return TrainTrace(
        loss_history=loss_history,
        steps=np.asarray(rec_steps),
        loss=np.asarray(rec_loss),
        inv_temp=np.asarray(rec_t),
        rel_bias=np.asarray(rec_rb),
        opt_margin=np.asarray(rec_margin),
        opt_rel_bias=np.asarray(rec_brel),
        final=final,
        final_loss=float(loss_history[-1]),
        final_t=t_final,
        final_rel_bias=b_final / t_final,
        delta=np.asarray(rec_delta) if rec_delta else None,
        deadapted_margin=np.asarray(rec_deadapted) if rec_deadapted else None,
        final_delta=float(1.0 / (1.0 + np.exp(-x_adapter))) if use_adapter else None,
    )


def train(config: TrainConfig) -> TrainTrace:
    """Adam on the paired sigmoid loss (two modalities, one edge)."""
    if config.modality_count != 2:
        raise ConfigError("train handles exactly 2 modalities; use train_multimodal")
    return _run(config, use_adapter=False)


def train_multimodal(config: TrainConfig) -> TrainTrace:
    """Adam on the summed pairwise losses over the synchronization graph.

    Recorded margins are the worst-edge extremal margins. With k = 2 this is
    bit-identical to train on the same seed.
    """
    return _run(config, use_adapter=False)


def train_with_explicit_adapters(config: TrainConfig) -> TrainTrace:
    """As train, but the loss sees (dU, +sqrt(1-d^2)) vs (dV, -sqrt(1-d^2))
    with sigmoid-reparameterized trainable delta. Recorded margins are
    de-adapted (computed on the raw U, V, which the adapter maps affinely)."""
    return _run(config, use_adapter=True)


def _margin_row(trace: TrainTrace):
    pair = trace.final_pair
    stats = gram_stats(pair)
    qstats = trimmed_stats(pair, 0.05, 0.05)
    return {
        "final_t": trace.final_t,
        "final_loss": trace.final_loss,
        "final_loss_mean": trace.final_loss / (pair.count * pair.count),
        "final_margin": float(stats.opt_margin),
        "final_rel_bias_opt": float(stats.opt_rel_bias),
        "final_margin_q": float(qstats.opt_margin),
        "final_rel_bias_q": float(qstats.opt_rel_bias),
    }


def sweep_fixed_rel_bias(base: TrainConfig, rb_values) -> list:
    """One run per fixed relative bias; embeddings and t trainable."""
    if base.parameterization is not Parameterization.REL_BIAS:
        raise ConfigError("the fixed-rel-bias sweep requires the relative-bias form")
    rows = []
    for rb in rb_values:
        cfg = replace(base, b0=float(rb),
                      trainable=replace(base.trainable, bias=False))
        trace = train(cfg)
        row = {"rb": float(rb)}
        row.update(_margin_row(trace))
        rows.append(row)
    return rows


def sweep_init(base: TrainConfig, t0_values, rb0_values) -> list:
    """Grid of runs over initial temperature and relative bias, both trainable."""
    if base.parameterization is not Parameterization.REL_BIAS:
        raise ConfigError("the initialization sweep requires the relative-bias form")
    rows = []
    for t0 in t0_values:
        for rb0 in rb0_values:
            cfg = replace(base, t0=float(t0), b0=float(rb0),
                          trainable=replace(base.trainable, log_inv_temp=True, bias=True))
            trace = train(cfg)
            row = {"t0": float(t0), "rb0": float(rb0)}
            row.update(_margin_row(trace))
            rows.append(row)
    return rows
