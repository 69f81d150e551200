"""Config-driven command line runner.

Usage: constellations <verb> --config cfg.json [--out dir] [--seed n]
[--threads n]. Configs are JSON, schema-validated with unknown keys rejected.
Artifacts land in the output directory: trace.csv / sweep.csv / bounds.csv,
final_embeddings.cnst, summary.json, analysis.json. Exit codes: 0 success,
2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import bounds as bounds_mod
from . import io as io_mod
from .constructions import build_constellation, tightness_config
from .errors import ConfigError, ConstellationError
from .geometry import gram_stats, trimmed_stats, validate_constellation, xi_report
from .losses import Parameterization
from .optimizer import (
    TrainConfig,
    TrainableFlags,
    sweep_fixed_rel_bias,
    sweep_init,
    train,
    train_multimodal,
    train_with_explicit_adapters,
)
from .retrieval import Direction, nn_retrieve, robustness_check
from .separation import modality_gap_certificate, perceptron_separator

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}
_BOOL = {"type": "boolean"}

_TRAINABLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "embeddings_u": _BOOL,
        "embeddings_v": _BOOL,
        "log_inv_temp": _BOOL,
        "bias": _BOOL,
        "adapter_delta": _BOOL,
    },
}

_TRAIN_PROPS = {
    "dim": _INT,
    "count": _INT,
    "modality_count": _INT,
    "graph": {"enum": ["complete", "star"]},
    "parameterization": {"enum": ["bias", "rel_bias"]},
    "trainable": _TRAINABLE_SCHEMA,
    "t0": _NUM,
    "b0": _NUM,
    "delta0": _NUM,
    "lr": _NUM,
    "iterations": _INT,
    "seed": _INT,
    "batch": _INT,
    "record_every": _INT,
    "adapter": _BOOL,
}

_TRAIN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": _TRAIN_PROPS,
    "required": ["dim", "count"],
}

SCHEMAS = {
    "construct": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"d": _INT, "m": _NUM, "b_rel": _NUM, "n": _INT, "seed": _INT},
        "required": ["d", "m", "b_rel", "n"],
    },
    "tightness": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"d": _INT, "n": _INT, "eps": _NUM, "seed": _INT,
                       "zenith_offset": _NUM},
        "required": ["d", "n"],
    },
    "train": _TRAIN_SCHEMA,
    "train-multi": _TRAIN_SCHEMA,
    "sweep-rb": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"base": _TRAIN_SCHEMA,
                       "rb_values": {"type": "array", "items": _NUM}},
        "required": ["base", "rb_values"],
    },
    "sweep-init": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"base": _TRAIN_SCHEMA,
                       "t0_values": {"type": "array", "items": _NUM},
                       "rb0_values": {"type": "array", "items": _NUM}},
        "required": ["base", "t0_values", "rb0_values"],
    },
    "analyze": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"path": _STR, "trim_q": _NUM, "retrieval": _BOOL},
        "required": ["path"],
    },
    "bounds": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"b_rel": _NUM, "m_min": _NUM, "m_max": _NUM, "points": _INT,
                       "m_values": {"type": "array", "items": _NUM}},
        "required": ["b_rel"],
    },
    "separate": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"path": _STR, "max_epochs": _INT, "certificate": _BOOL},
        "required": ["path"],
    },
    "retrieve": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"path": _STR, "t": _NUM, "b": _NUM, "batch": _INT},
        "required": ["path"],
    },
}


def _train_config(doc: dict, seed_override) -> TrainConfig:
    flags = TrainableFlags(**doc.get("trainable", {}))
    graph = None
    if "graph" in doc:
        from .constructions import SynchronizationGraph

        k = doc.get("modality_count", 2)
        graph = (SynchronizationGraph.complete(k) if doc["graph"] == "complete"
                 else SynchronizationGraph.star(k))
    kwargs = {
        key: doc[key]
        for key in ("modality_count", "t0", "b0", "delta0", "lr", "iterations",
                    "seed", "batch", "record_every")
        if key in doc
    }
    if seed_override is not None:
        kwargs["seed"] = seed_override
    param = Parameterization(doc.get("parameterization", "rel_bias"))
    return TrainConfig(dim=doc["dim"], count=doc["count"], graph=graph,
                       parameterization=param, trainable=flags, **kwargs)


def _write_trace_csv(path, trace):
    # loss column is the per-term mean (total / N^2) so runs of different
    # sizes plot on a common scale
    scale = 1.0 / trace.final_pair.count ** 2
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "t", "rel_bias", "margin"])
        for i in range(len(trace.steps)):
            writer.writerow([int(trace.steps[i]), repr(float(trace.loss[i]) * scale),
                             repr(float(trace.inv_temp[i])),
                             repr(float(trace.rel_bias[i])),
                             repr(float(trace.opt_margin[i]))])


def _write_rows_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(row[k])) if isinstance(row[k], float)
                             else row[k] for k in header])


def _summary(out_dir: Path, verb: str, doc: dict, seed, extra: dict, started: float):
    payload = {
        "verb": verb,
        "config": doc,
        "seed": seed,
        "wall_time_s": time.time() - started,
    }
    payload.update(extra)
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2, default=float))


def _analysis_row(pair, trim_q: float, with_retrieval: bool) -> dict:
    stats = gram_stats(pair)
    qstats = trimmed_stats(pair, trim_q, trim_q)
    xi = xi_report(pair)
    sep = perceptron_separator(pair.u, pair.v)
    row = {
        "min_pos": stats.min_pos,
        "max_pos": stats.max_pos,
        "mean_pos": stats.mean_pos,
        "min_neg": stats.min_neg,
        "max_neg": stats.max_neg,
        "mean_neg": stats.mean_neg,
        "margin": stats.opt_margin,
        "rel_bias": stats.opt_rel_bias,
        "margin_q": qstats.opt_margin,
        "rel_bias_q": qstats.opt_rel_bias,
        "xi": xi.xi,
        "mean_norms": xi.mean_of_norms,
        "norm_mean": xi.norm_of_mean,
        "xi_random_baseline": xi.random_baseline,
        "separable": sep is not None,
    }
    if with_retrieval:
        row["retrieval_u2v"] = nn_retrieve(pair, Direction.U_TO_V).success_fraction
        row["retrieval_v2u"] = nn_retrieve(pair, Direction.V_TO_U).success_fraction
    else:
        row["retrieval_u2v"] = None
        row["retrieval_v2u"] = None
    return row


def _run_verb(verb: str, doc: dict, out_dir: Path, seed) -> dict:
    if verb == "construct":
        pair, params = build_constellation(
            doc["d"], doc["m"], doc["b_rel"], doc["n"],
            seed=seed if seed is not None else doc.get("seed", 0))
        io_mod.write_pair_file(out_dir / "final_embeddings.cnst", pair)
        report = validate_constellation(pair, params, tol=1e-9)
        return {"margin": params.margin, "rel_bias": params.rel_bias,
                "validated": report.passed}
    if verb == "tightness":
        pair = tightness_config(doc["d"], doc["n"], eps=doc.get("eps", 1e-2),
                                seed=seed if seed is not None else doc.get("seed", 0),
                                zenith_offset=doc.get("zenith_offset", 0.02))
        io_mod.write_pair_file(out_dir / "final_embeddings.cnst", pair)
        return {"d": doc["d"], "n": doc["n"],
                "separable": perceptron_separator(pair.u, pair.v) is not None}
    if verb in ("train", "train-multi"):
        cfg = _train_config(doc, seed)
        if doc.get("adapter"):
            trace = train_with_explicit_adapters(cfg)
        elif verb == "train-multi" or cfg.modality_count > 2:
            trace = train_multimodal(cfg)
        else:
            trace = train(cfg)
        _write_trace_csv(out_dir / "trace.csv", trace)
        io_mod.write_pair_file(out_dir / "final_embeddings.cnst", trace.final_pair)
        stats = gram_stats(trace.final_pair)
        return {"final_loss": trace.final_loss, "final_t": trace.final_t,
                "final_rel_bias": trace.final_rel_bias,
                "final_margin": stats.opt_margin,
                "final_opt_rel_bias": stats.opt_rel_bias,
                "separated": stats.separated,
                "final_delta": trace.final_delta}
    if verb == "sweep-rb":
        cfg = _train_config(doc["base"], seed)
        rows = sweep_fixed_rel_bias(cfg, doc["rb_values"])
        _write_rows_csv(out_dir / "sweep.csv", rows)
        return {"rows": len(rows)}
    if verb == "sweep-init":
        cfg = _train_config(doc["base"], seed)
        rows = sweep_init(cfg, doc["t0_values"], doc["rb0_values"])
        _write_rows_csv(out_dir / "sweep.csv", rows)
        return {"rows": len(rows)}
    if verb == "analyze":
        pair = io_mod.load_pair(doc["path"])
        row = _analysis_row(pair, doc.get("trim_q", 0.05), doc.get("retrieval", True))
        _write_rows_csv(out_dir / "analysis.csv", [row])
        (out_dir / "analysis.json").write_text(json.dumps(row, indent=2, default=float))
        return {"columns": len(row)}
    if verb == "bounds":
        b_rel = doc["b_rel"]
        ms = doc.get("m_values")
        if ms is None:
            ms = np.linspace(doc.get("m_min", 0.01), doc.get("m_max", 0.3),
                             doc.get("points", 30)).tolist()
        rows = []
        for m in ms:
            label = bounds_mod.classify_region(m, b_rel)
            row = {"m": float(m), "b_rel": float(b_rel),
                   "feasible": label.feasible,
                   "exponential_exists": label.exponential_exists,
                   "modality_gap_guaranteed": label.modality_gap_guaranteed,
                   "lower_nats": None, "upper_nats": None}
            if label.exponential_exists:
                row["lower_nats"] = bounds_mod.lower_exponent(m, b_rel)
                row["upper_nats"] = bounds_mod.upper_exponent(m, b_rel)
            rows.append(row)
        _write_rows_csv(out_dir / "bounds.csv", rows)
        return {"rows": len(rows)}
    if verb == "separate":
        pair = io_mod.load_pair(doc["path"])
        h = perceptron_separator(pair.u, pair.v,
                                 max_epochs=doc.get("max_epochs", 1000))
        result = {"separable": h is not None,
                  "h": None if h is None else h.tolist()}
        if doc.get("certificate", False):
            cert = modality_gap_certificate(pair)
            result["certificate"] = {
                "h": cert.h.tolist(),
                "support": list(cert.support),
                "u_margin": cert.u_margin,
                "v_violations": list(cert.v_violations),
            }
        (out_dir / "separation.json").write_text(
            json.dumps(result, indent=2, default=float))
        return {"separable": result["separable"]}
    if verb == "retrieve":
        pair = io_mod.load_pair(doc["path"])
        result = {
            "u2v": nn_retrieve(pair, Direction.U_TO_V).success_fraction,
            "v2u": nn_retrieve(pair, Direction.V_TO_U).success_fraction,
        }
        if "t" in doc and "batch" in doc:
            result["robustness"] = robustness_check(
                pair, doc["t"], doc.get("b", 0.0), doc["batch"])
        (out_dir / "retrieval.json").write_text(
            json.dumps(result, indent=2, default=float))
        return {"u2v": result["u2v"], "v2u": result["v2u"]}
    raise ConfigError(f"unknown verb {verb!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="constellations", description=__doc__)
    parser.add_argument("verb", choices=sorted(SCHEMAS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=".")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; execution is serial and deterministic")
    args = parser.parse_args(argv)

    started = time.time()
    try:
        doc = json.loads(Path(args.config).read_text())
        jsonschema.validate(doc, SCHEMAS[args.verb])
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        extra = _run_verb(args.verb, doc, out_dir, args.seed)
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except ConstellationError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        (out_dir / "error.json").write_text(json.dumps(payload, indent=2))
        return 3
    _summary(out_dir, args.verb, doc, args.seed, extra, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
