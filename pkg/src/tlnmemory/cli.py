"""Command-line interface: ``tlnmem learn|infer|certify|benchmark|plot``.

Every run reads a YAML key-value config (``--config``), applies flag
overrides (``--seed``, ``--out``, ``--set section.key=value`` ...) and writes
the merged effective config to ``<out>/config.effective.yaml``. Result files
carry no timestamps; those go to the sidecar ``<out>/run.log``.

Exit codes: 0 success, 1 usage, 2 domain error (capacity, infeasibility,
bad data), 3 numerical failure.

Result schemas (``results.json``, key ``schema`` = "tlnmemory.results/1"):

learn
    ``patterns``: list of {id, index, label, registered, support, attempts,
    triggered, similarity, trajectory}; ``identity_error``; ``model``.
infer
    ``inputs``: list of {id, similarity, support, matched_pattern, converged,
    triggered, gate_closed_at, error}; ``sweep``: rows of
    accuracy_vs_radius.csv (pattern, method, rho, radius, trials, correct,
    accuracy).
certify
    ``certificates``: list of {pattern, attractor_index, lp, sdp}, where each
    method entry holds r, reason (when r = 0) and the certificate details.
benchmark
    ``sequences``: per-sequence labels and radii; ``summary``: medians.
plot
    ``figures`` and ``missing``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .controller import LearnControlConfig, LqrConfig, TriggerConfig
from .data import bundled_mnist, load_idx, load_model, sample_sequence, save_model, synthetic_patterns
from .errors import (CapacityError, DataFormatError, DegenerateEncoderError, DegenerateNetworkError,
                     DimensionError, DivergenceError, IndexRangeError, NoCertificateError,
                     NotEquilibriumError, NotStabilizableError, ParameterError, SolverError,
                     TlnMemoryError, TransitionError)
from .memory import (MemoryModel, Pattern, bind_sequence, cosine_similarity, decode, infer_pattern,
                     learn_pattern)
from .network import CstlnParams, build_network
from .roa import SdpSearchConfig, certify_lp, certify_sdp, failure_onset, shift_about
from .session import GainCache, SessionConfig

SCHEMA = "tlnmemory.results/1"
MODEL_FILE = "model.tlnm"

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("tlnmemory.cli")


class UsageError(Exception):
    pass


def _session_defaults() -> dict:
    return dataclasses.asdict(SessionConfig())


DEFAULTS: dict = {
    "seed": 0,
    "out": "run",
    "network": {"n": 7, "epsilon": 0.9, "delta": 2.0, "c": 1.0},
    "session": _session_defaults(),
    "model": {"encoder_rule": "projection", "path": None},
    "data": {
        "source": "mnist",          # mnist (bundled subset) | idx | synthetic
        "images": None,
        "labels": None,
        "patterns": 6,
        "distinct_labels": True,
        "max_cos": 0.8,
        "d": 784,                   # synthetic only
    },
    "infer": {
        "inputs": None,             # .npy or .csv rows; default: the stored patterns
        "radii": [],                # absolute noise radii swept per stored pattern
        "rho": [],                  # multiples of the certified radius
        "trials": 100,
        "noise_mode": "range",
        "method": "lp",
    },
    "certify": {
        "method": "both",
        "lp": {"joint": True, "combine": "min"},
        "sdp": dataclasses.asdict(SdpSearchConfig()),
    },
    "benchmark": {
        "sequences": 20,
        "bind": "direct",           # direct | simulate
        "workers": 1,
        "onset": {"enabled": False, "rhos": [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0],
                  "trials": 50},
    },
    "plot": {"results": None, "grid": 200},
}


# --------------------------------------------------------------------------
# config handling

def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{path}{k}"
        if k not in base:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise UsageError(f"config key {key!r} must be a mapping")
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = v
    return out


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise UsageError(f"unknown config key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise UsageError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def load_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise UsageError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config must be a mapping")
        cfg = _merge(cfg, doc)
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(cfg, k.strip(), yaml.safe_load(v))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.data_images is not None:
        cfg["data"]["images"] = args.data_images
        cfg["data"]["source"] = "idx"
    if args.data_labels is not None:
        cfg["data"]["labels"] = args.data_labels
    if getattr(args, "model", None):
        cfg["model"]["path"] = args.model
    if args.method is not None:
        if args.command == "infer":
            cfg["infer"]["method"] = args.method
        else:
            cfg["certify"]["method"] = args.method
    return cfg


def session_config(cfg: dict) -> SessionConfig:
    s = dict(cfg["session"])
    try:
        return SessionConfig(**{k: v for k, v in s.items() if k not in ("trigger", "learn", "lqr")},
                             trigger=TriggerConfig(**s["trigger"]),
                             learn=LearnControlConfig(**s["learn"]),
                             lqr=LqrConfig(**s["lqr"]))
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"invalid session config: {exc}") from exc


def network_params(cfg: dict) -> CstlnParams:
    nw = cfg["network"]
    return CstlnParams(int(nw["n"]), float(nw["epsilon"]), float(nw["delta"]), float(nw["c"]))


# --------------------------------------------------------------------------
# output helpers

def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                         for v in (r.get(h) for h in header)])


def _results(command: str, cfg: dict, **body) -> dict:
    return {"schema": SCHEMA, "version": __version__, "command": command, "seed": cfg["seed"],
            "network": cfg["network"], **body}


# --------------------------------------------------------------------------
# data

def load_patterns(cfg: dict):
    """Return (PatternSet of the configured sequence, description dict)."""
    dc = cfg["data"]
    count = int(dc["patterns"])
    if count < 0:
        raise ParameterError("data.patterns must be >= 0")
    rng = np.random.default_rng(cfg["seed"])
    src = dc["source"]
    if src == "synthetic":
        if count == 0:
            return synthetic_patterns(1, int(dc["d"]), cfg["seed"]).subset([]), {"source": src}
        ps = synthetic_patterns(count, int(dc["d"]), cfg["seed"])
        return ps, {"source": src, "d": int(dc["d"])}
    if src == "mnist":
        full = bundled_mnist()
    elif src == "idx":
        if not dc["images"]:
            raise UsageError("data.source=idx needs --data-images")
        full = load_idx(dc["images"], dc["labels"])
    else:
        raise UsageError(f"unknown data source {src!r}")
    if count == 0:
        return full.subset([]), {"source": src}
    seq = sample_sequence(full, count, rng, bool(dc["distinct_labels"]), float(dc["max_cos"]))
    return seq, {"source": src, "images": dc["images"], "labels": dc["labels"]}


def _pattern_ids(ps) -> list:
    out = []
    for k in range(len(ps)):
        idx = None if ps.indices is None else int(ps.indices[k])
        out.append(f"p{k + 1}" if idx is None else f"p{k + 1}-i{idx}")
    return out


def _model_path(cfg: dict) -> Path:
    p = cfg["model"]["path"]
    return Path(p) if p else Path(cfg["out"]) / MODEL_FILE


# --------------------------------------------------------------------------
# commands

def cmd_learn(cfg: dict, out: Path) -> int:
    params = network_params(cfg)
    net = build_network(params)
    scfg = session_config(cfg)
    ps, desc = load_patterns(cfg)
    model = MemoryModel(params, ps.d, cfg["model"]["encoder_rule"])
    rng = np.random.default_rng(cfg["seed"])
    ids = _pattern_ids(ps)
    records, error = [], None
    for k in range(len(ps)):
        rec = {"id": ids[k], "index": None if ps.indices is None else int(ps.indices[k]),
               "label": None if ps.labels is None else int(ps.labels[k])}
        try:
            res = learn_pattern(model, net, Pattern.unit(ps.patterns[k], ids[k]), scfg, rng, record=True)
        except (CapacityError, TransitionError) as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
            records.append(rec)
            error = exc
            break
        rec.update(registered=res.registered, support=None if res.support is None else list(res.support),
                   attempts=res.attempts, triggered=res.triggered)
        if res.registered:
            e = model.registry[-1]
            rec["similarity"] = cosine_similarity(decode(model, e.x_star), e.pattern)
        if res.sessions and res.sessions[-1].trajectory is not None:
            name = f"learn_traj_{ids[k]}.csv"
            res.sessions[-1].trajectory.to_csv(out / name)
            rec["trajectory"] = name
        records.append(rec)
        log.info("pattern %s: registered=%s support=%s attempts=%d", ids[k], res.registered,
                 rec.get("support"), res.attempts)
    errs = model.identity_errors()
    ident = max((max(a, b) for a, b in errs), default=0.0)
    save_model(out / MODEL_FILE, model)
    doc = _results("learn", cfg, data=desc, patterns=records, identity_error=ident, model=MODEL_FILE,
                   registered=len(model.registry))
    if error is not None:
        doc["error"] = {"type": type(error).__name__, "message": str(error), "exit_code": EXIT_DOMAIN}
        write_json(out / "results.json", doc)
        write_json(out / "error.json", doc["error"])
        print(f"error: {error}", file=sys.stderr)
        return EXIT_DOMAIN
    write_json(out / "results.json", doc)
    print(f"learned {len(model.registry)} pattern(s); model written to {out / MODEL_FILE}")
    return EXIT_OK


def _read_inputs(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".npy":
        X = np.load(path, allow_pickle=False)
    else:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.atleast_2d(np.asarray(X, dtype=float))


def _certified_radius(net, model, j: int, method: str, cfg: dict) -> float:
    e = model.registry[j]
    if method == "lp":
        lc = cfg["certify"]["lp"]
        return certify_lp(net, model.W_E, e.pattern, e.support[0], joint=bool(lc["joint"]),
                          combine=lc["combine"]).r
    if method == "sdp":
        return certify_sdp(shift_about(net, e.x_star), model.W_E, SdpSearchConfig(**cfg["certify"]["sdp"])).r
    raise UsageError(f"unknown method {method!r}")


def cmd_infer(cfg: dict, out: Path) -> int:
    model = load_model(_model_path(cfg))
    net = build_network(model.params)
    scfg = session_config(cfg)
    ic = cfg["infer"]
    cache = GainCache(net, scfg.lqr)
    if ic["inputs"]:
        X = _read_inputs(ic["inputs"])
        ids = [f"in{k + 1}" for k in range(len(X))]
        refs = [None] * len(X)
    else:
        X = np.array([e.pattern for e in model.registry]).reshape(-1, model.d)
        ids = [e.pattern_id for e in model.registry]
        refs = list(X)
    if X.size and X.shape[1] != model.d:
        raise DimensionError(f"inputs have length {X.shape[1]}, model expects {model.d}")
    rows = []
    for k, (pid, p) in enumerate(zip(ids, X)):
        rec = {"id": pid}
        try:
            res, outc = infer_pattern(model, net, p, scfg, reference=refs[k], cache=cache,
                                      rng=np.random.default_rng(cfg["seed"]), record=(k == 0))
            rec.update(similarity=res.similarity, support=list(res.matched_support),
                       matched_pattern=res.matched_pattern, converged=res.converged,
                       triggered=res.triggered, gate_closed_at=float(outc.gate_closed_at[0]))
            if k == 0 and outc.trajectory is not None:
                outc.trajectory.to_csv(out / "infer_traj.csv")
        except TlnMemoryError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(rec)
    write_csv(out / "inference.csv",
              ["id", "similarity", "support", "matched_pattern", "converged", "triggered", "error"],
              [{**r, "support": " ".join(map(str, r.get("support", [])))} for r in rows])

    sweep = []
    methods = ["lp", "sdp"] if ic["method"] == "both" else [ic["method"]]
    rng = np.random.default_rng(cfg["seed"])
    for j, e in enumerate(model.registry):
        plans = []
        if ic["radii"]:
            plans.append(("absolute", 1.0, [float(r) for r in ic["radii"]]))
        if ic["rho"]:
            for m in methods:
                try:
                    r = _certified_radius(net, model, j, m, cfg)
                except (NoCertificateError, SolverError, DegenerateEncoderError) as exc:
                    log.warning("pattern %s: no %s radius (%s)", e.pattern_id, m, exc)
                    continue
                if r > 0:
                    plans.append((m, r, [float(v) for v in ic["rho"]]))
        for label, radius, levels in plans:
            _, reps = failure_onset(net, model, j, radius, levels, int(ic["trials"]), rng, scfg, cache,
                                    ic["noise_mode"])
            for rep in reps:
                sweep.append({"pattern": e.pattern_id, "method": label,
                              "rho": rep.rho if label != "absolute" else None,
                              "radius": rep.rho * radius, "trials": rep.trials,
                              "correct": rep.correct, "accuracy": rep.accuracy,
                              "certified_radius": radius if label != "absolute" else None})
    if sweep:
        write_csv(out / "accuracy_vs_radius.csv",
                  ["pattern", "method", "rho", "radius", "certified_radius", "trials", "correct", "accuracy"],
                  sweep)
    write_json(out / "results.json", _results("infer", cfg, model=str(_model_path(cfg)), inputs=rows,
                                              sweep=sweep))
    ok = sum(1 for r in rows if "error" not in r)
    print(f"inferred {ok}/{len(rows)} input(s)" + (f"; {len(sweep)} sweep rows" if sweep else ""))
    return EXIT_OK


def certify_model(net, model, method: str, cfg: dict) -> list:
    """Per-pattern certificate records; infeasible cases get r = 0 and a reason."""
    out = []
    lc = cfg["certify"]["lp"]
    scfg = SdpSearchConfig(**cfg["certify"]["sdp"])
    for e in model.registry:
        rec = {"pattern": e.pattern_id, "attractor_index": int(e.support[0])}
        if method in ("lp", "both"):
            try:
                c = certify_lp(net, model.W_E, e.pattern, e.support[0], joint=bool(lc["joint"]),
                               combine=lc["combine"])
                body = c.to_json()
                if not c.sides:
                    body["reason"] = "; ".join(c.flags) or "infeasible"
                rec["lp"] = body
            except (DegenerateEncoderError, IndexRangeError, SolverError, RuntimeError) as exc:
                rec["lp"] = {"r": 0.0, "reason": f"{type(exc).__name__}: {exc}"}
        if method in ("sdp", "both"):
            try:
                c = certify_sdp(shift_about(net, e.x_star), model.W_E, scfg)
                rec["sdp"] = c.to_json()
            except (NoCertificateError, SolverError, DegenerateEncoderError, NotEquilibriumError) as exc:
                rec["sdp"] = {"r": 0.0, "reason": f"{type(exc).__name__}: {exc}"}
        out.append(rec)
    return out


def _cert_rows(certs: list, extra: Optional[dict] = None) -> list:
    rows = []
    for c in certs:
        lp, sdp = c.get("lp", {}), c.get("sdp", {})
        sides = lp.get("sides", {})
        rows.append({**(extra or {}), "pattern": c["pattern"], "attractor_index": c["attractor_index"],
                     "r_lp": lp.get("r"), "r_lp_L": sides.get("L", {}).get("r"),
                     "r_lp_R": sides.get("R", {}).get("r"), "r_sdp": sdp.get("r"),
                     "sdp_verified": sdp.get("verified"),
                     "lp_flags": "; ".join(lp.get("flags", [])) or lp.get("reason"),
                     "sdp_reason": sdp.get("reason")})
    return rows


CERT_HEADER = ["pattern", "attractor_index", "r_lp", "r_lp_L", "r_lp_R", "r_sdp", "sdp_verified",
               "lp_flags", "sdp_reason"]


def cmd_certify(cfg: dict, out: Path) -> int:
    method = cfg["certify"]["method"]
    if method not in ("lp", "sdp", "both"):
        raise UsageError(f"--method must be lp, sdp or both, got {method!r}")
    model = load_model(_model_path(cfg))
    net = build_network(model.params)
    certs = certify_model(net, model, method, cfg)
    write_json(out / "certificates.json", {"schema": SCHEMA, "certificates": certs})
    write_csv(out / "certificates.csv", CERT_HEADER, _cert_rows(certs))
    summary = {}
    for m in ("lp", "sdp"):
        radii = [c[m]["r"] for c in certs if m in c]
        if radii:
            summary[m] = {"median": float(np.median(radii)), "certified": sum(r > 0 for r in radii),
                          "patterns": len(radii)}
    write_json(out / "results.json", _results("certify", cfg, method=method, certificates=certs,
                                              summary=summary))
    for m, s in summary.items():
        print(f"{m}: {s['certified']}/{s['patterns']} certified, median radius {s['median']:.4g}")
    if certs and all(s["certified"] == 0 for s in summary.values()):
        print("error: no pattern could be certified by the requested method(s)", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def _benchmark_one(cfg: dict, seed: int) -> dict:
    """One (seed, sequence) run; pure function of its arguments."""
    c = copy.deepcopy(cfg)
    c["seed"] = seed
    params = network_params(c)
    net = build_network(params)
    ps, _ = load_patterns(c)
    model = MemoryModel(params, ps.d, c["model"]["encoder_rule"])
    ids = _pattern_ids(ps)
    if c["benchmark"]["bind"] == "simulate":
        rng = np.random.default_rng(seed)
        scfg = session_config(c)
        for k in range(len(ps)):
            learn_pattern(model, net, Pattern.unit(ps.patterns[k], ids[k]), scfg, rng)
    else:
        bind_sequence(model, net, ps.patterns, ids)
    certs = certify_model(net, model, c["certify"]["method"], c)
    doc = {"seed": seed, "labels": None if ps.labels is None else ps.labels.tolist(),
           "indices": None if ps.indices is None else ps.indices.tolist(), "certificates": certs}
    oc = c["benchmark"]["onset"]
    if oc["enabled"]:
        scfg = session_config(c)
        cache = GainCache(net, scfg.lqr)
        rng = np.random.default_rng(seed)
        onsets = []
        for j, cert in enumerate(certs):
            r = cert.get("lp", {}).get("r", 0.0)
            if not r:
                onsets.append(None)
                continue
            onset, _ = failure_onset(net, model, j, r, oc["rhos"], int(oc["trials"]), rng, scfg, cache)
            onsets.append(onset)
        doc["onset_rho"] = onsets
    return doc


def cmd_benchmark(cfg: dict, out: Path) -> int:
    bc = cfg["benchmark"]
    if bc["bind"] not in ("direct", "simulate"):
        raise UsageError("benchmark.bind must be direct or simulate")
    seeds = [int(cfg["seed"]) + k for k in range(int(bc["sequences"]))]
    workers = max(1, int(bc["workers"]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            docs = list(ex.map(_benchmark_one, [cfg] * len(seeds), seeds))
    else:
        docs = [_benchmark_one(cfg, s) for s in seeds]
    docs.sort(key=lambda d: d["seed"])
    rows, onset_rows = [], []
    for d in docs:
        rows += _cert_rows(d["certificates"], {"seed": d["seed"]})
        for j, o in enumerate(d.get("onset_rho", [])):
            onset_rows.append({"seed": d["seed"], "pattern": d["certificates"][j]["pattern"],
                               "r_lp": d["certificates"][j]["lp"]["r"], "onset_rho": o})
    write_csv(out / "radii.csv", ["seed"] + CERT_HEADER, rows)
    summary = {}
    for m in ("lp", "sdp"):
        v = [r[f"r_{m}"] for r in rows if r.get(f"r_{m}") is not None]
        if v:
            summary[f"median_{m}"] = float(np.median(v))
    if "median_lp" in summary and "median_sdp" in summary:
        summary["lp_exceeds_sdp"] = summary["median_lp"] > summary["median_sdp"]
    if onset_rows:
        write_csv(out / "onset.csv", ["seed", "pattern", "r_lp", "onset_rho"], onset_rows)
        found = [r["onset_rho"] for r in onset_rows if r["onset_rho"] is not None]
        summary["median_onset_rho"] = float(np.median(found)) if found else None
    write_json(out / "results.json", _results("benchmark", cfg, sequences=docs, summary=summary))
    print(" ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_plot(cfg: dict, out: Path) -> int:
    from . import plotting as pl
    src = Path(cfg["plot"]["results"] or cfg["out"])
    res = int(cfg["plot"]["grid"])
    figures, missing, meta = [], [], {}
    model = None
    mpath = Path(cfg["model"]["path"]) if cfg["model"]["path"] else src / MODEL_FILE
    if mpath.exists():
        model = load_model(mpath)
    else:
        missing.append(str(mpath))
    traj = None
    for name in ["infer_traj.csv"] + sorted(p.name for p in src.glob("learn_traj_*.csv")):
        if (src / name).exists():
            traj = pl.read_csv_columns(src / name)
            meta["trajectory_source"] = name
            break
    if traj is None:
        missing.append(str(src / "infer_traj.csv"))
    if model is not None and model.registry:
        net = build_network(model.params)
        states = pl.stack_states(traj, model.n) if traj is not None else None
        att = np.array([e.x_star for e in model.registry])
        svg, m = pl.projection_figure(net, att, states, res)
        svg.save(out / "projection.svg")
        figures.append("projection.svg")
        meta["projection"] = m
    if traj is not None:
        states = pl.stack_states(traj)
        pl.rates_figure(traj["t"], states, traj.get("G")).save(out / "rates.svg")
        figures.append("rates.svg")
    acc = src / "accuracy_vs_radius.csv"
    if acc.exists():
        with open(acc, newline="") as fh:
            rows = list(csv.DictReader(fh))
        curves, marks = {}, {}
        for r in rows:
            key = f"{r['pattern']} ({r['method']})"
            curves.setdefault(key, ([], []))
            curves[key][0].append(float(r["radius"]))
            curves[key][1].append(float(r["accuracy"]))
            if r.get("certified_radius"):
                marks[f"r {r['pattern']} {r['method']}"] = float(r["certified_radius"])
        curves["__marks__"] = marks
        pl.accuracy_figure(curves).save(out / "accuracy.svg")
        figures.append("accuracy.svg")
    else:
        missing.append(str(acc))
    table = next((src / n for n in ("radii.csv", "certificates.csv") if (src / n).exists()), None)
    if table is not None:
        cols = pl.read_csv_columns(table)
        groups = {m.upper(): cols[f"r_{m}"][np.isfinite(cols[f"r_{m}"])] for m in ("lp", "sdp")
                  if f"r_{m}" in cols}
        pl.box_figure(groups).save(out / "radii_box.svg")
        figures.append("radii_box.svg")
    else:
        missing.append(str(src / "radii.csv"))
    write_json(out / "plots.json", {"schema": SCHEMA, "figures": figures, "missing": missing,
                                    "metadata": meta})
    for m in missing:
        print(f"missing input: {m}", file=sys.stderr)
    if not figures:
        print("error: nothing to plot", file=sys.stderr)
        return EXIT_USAGE
    print("wrote " + ", ".join(figures))
    return EXIT_OK


COMMANDS = {"learn": cmd_learn, "infer": cmd_infer, "certify": cmd_certify,
            "benchmark": cmd_benchmark, "plot": cmd_plot}


# --------------------------------------------------------------------------
# entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--data-images", help="IDX image file (switches data.source to idx)")
    common.add_argument("--data-labels", help="IDX label file")
    common.add_argument("--method", choices=["lp", "sdp", "both"],
                        help="certificate method (certify, benchmark; infer: radius used by rho sweeps)")
    common.add_argument("--model", help="model file (default <out>/model.tlnm)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set network.epsilon=0.8")
    common.add_argument("-v", "--verbose", action="store_true")
    p = _Parser(prog="tlnmem", description="Online associative memory on a chain TLN.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("learn", parents=[common], help="learn a pattern sequence")
    sub.add_parser("infer", parents=[common], help="retrieve inputs; optional noise sweep")
    sub.add_parser("certify", parents=[common], help="certified noise radii per stored pattern")
    sub.add_parser("benchmark", parents=[common], help="LP/SDP radii over many random sequences")
    sub.add_parser("plot", parents=[common], help="SVG figures from a results directory")
    return p


DOMAIN_ERRORS = (CapacityError, TransitionError, ParameterError, DimensionError, IndexRangeError,
                 DataFormatError, NoCertificateError, DegenerateEncoderError, NotEquilibriumError)
NUMERIC_ERRORS = (DivergenceError, SolverError, NotStabilizableError, DegenerateNetworkError,
                  FloatingPointError, np.linalg.LinAlgError)


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("tlnmemory")
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    with open(out / "config.effective.yaml", "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True, default_flow_style=False)
    log.info("tlnmem %s %s", args.command, __version__)
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        code = COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (DOMAIN_ERRORS + NUMERIC_ERRORS) as exc:
        code = EXIT_NUMERIC if isinstance(exc, NUMERIC_ERRORS) else EXIT_DOMAIN
        record = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
        write_json(out / "error.json", record)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    finally:
        log.info("finished with exit code %d in %.2fs", code, time.perf_counter() - t0)
        root.removeHandler(handler)
        handler.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
