"""Experiment runners behind the CLI subcommands.

Every runner takes a resolved config dict, writes its artifacts into
``cfg["out"]`` and returns the summary it wrote. All randomness is drawn
from streams keyed by the master seed and the cell labels, so results do
not depend on execution order or worker count.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from barron_risk import bounds
from barron_risk.barron import DiscreteBarronRep, TargetSpec, one_neuron, positive_rep
from barron_risk.config import config_hash
from barron_risk.data import (
    Dataset,
    NoiseSpec,
    export_csv,
    load_dataset_csv,
    load_mnist,
    subsample,
    synth,
    uniform_cube,
    verify_sha256,
    with_bias,
)
from barron_risk.kernel import JITTER, KrrModel, RandomFeatureKernel, gram, krr_predict, krr_solve
from barron_risk.model import InitSpec, LossSpec, forward_truncated, load_params, path_norm, save_params
from barron_risk.numerics import RngStream, loglog_slope, sample_l1_sphere, stream_id
from barron_risk.training import TrainConfig, b_n, train, zero_one_risk

log = logging.getLogger(__name__)

MODES = {"regularized": None, "unregularized": 0.0}


class DatasetNotFound(FileNotFoundError):
    pass


def stream(cfg: dict, *labels) -> RngStream:
    return RngStream(int(cfg["seed"]), stream_id(*labels))


def _pmap(fn, arglist, threads: int):
    if threads <= 1 or len(arglist) <= 1:
        return [fn(*args) for args in arglist]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*arglist)))


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def train_config(tcfg: dict, seed: RngStream, lam=None, b_scale: float = 1.0) -> TrainConfig:
    return TrainConfig(
        T=tcfg["T"],
        base_lr=tcfg["base_lr"],
        decay_factor=tcfg["decay_factor"],
        decay_at=tuple(tcfg["decay_at"]),
        betas=tuple(tcfg["betas"]),
        eps=tcfg["eps"],
        batch_size=tcfg["batch_size"],
        lam=tcfg["lam"] if lam is None else lam,
        lam_factor=tcfg["lam_factor"],
        b_scale=b_scale,
        seed=seed,
        record_every=tcfg["record_every"],
    )


def _mode_lam(tcfg: dict, mode: str):
    return 0.0 if mode == "unregularized" else tcfg["lam"]


# ---------------------------------------------------------------- data

def build_target(tcfg: dict, cfg: dict) -> TargetSpec:
    d = tcfg["d"]
    ncfg = dict(tcfg.get("noise", {"kind": "none"}))
    if ncfg.get("kind") == "gaussian":
        ncfg.setdefault("c0", 2.0)
    noise = NoiseSpec(**ncfg)
    kind = tcfg["kind"]
    if kind == "one_neuron":
        direction = tcfg.get("direction", "e1")
        if direction == "e1":
            rep = one_neuron(d)
        elif direction == "random":
            rep = one_neuron(d, sample_l1_sphere(d, stream(cfg, "target-direction", d)))
        else:
            rep = one_neuron(d, direction)
    elif kind == "positive_rep":
        rep = positive_rep(d, tcfg["atoms"], stream(cfg, "target-rep", d, tcfg["atoms"]))
    else:
        rep = DiscreteBarronRep.load(tcfg["rep_path"])
        if rep.d != d:
            raise ValueError(f"shape error: {tcfg['rep_path']} has d={rep.d}, config says d={d}")
    return TargetSpec(rep, noise)


def _require(paths):
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise DatasetNotFound("dataset not found: expected " + ", ".join(missing))


def build_data(dcfg: dict, cfg: dict, *labels):
    """Return ``(train, test, metric)``; ``metric`` is ``test_risk`` or ``test_accuracy``.

    Synthetic test sets are noiseless, so the reported risk is the excess risk
    ``E (Tf - f*)^2 / 2``. With ``bias`` set, a constant-1 coordinate is
    prepended to every input.
    """
    train_set, test, metric = _load_source(dcfg, cfg, *labels)
    if dcfg.get("bias"):
        train_set = with_bias(train_set)
        test = None if test is None else with_bias(test)
    return train_set, test, metric


def _load_source(dcfg: dict, cfg: dict, *labels):
    source = dcfg["source"]
    if source == "synthetic":
        target = build_target(dcfg["target"], cfg)
        d = target.rep.d
        data = synth(target, dcfg["n"], d, stream(cfg, "train-data", *labels))
        Xt = uniform_cube(dcfg["test_size"], d, stream(cfg, "test-data", *labels))
        test = Dataset(Xt, target.rep.eval(Xt), {"source": "synthetic-test", "gamma2": target.rep.gamma_p(2)})
        return data, test, "test_risk"
    if source == "csv":
        return load_dataset_csv(dcfg["csv"]), None, None
    _require([dcfg["images"], dcfg["labels"]])
    for key, digest in dcfg.get("checksums", {}).items():
        verify_sha256(dcfg[key], digest)
    full = load_mnist(dcfg["images"], dcfg["labels"])
    idx = stream(cfg, "mnist-subsample", *labels).generator().permutation(full.n)
    n = min(dcfg["n"], full.n)
    data = full.take(np.sort(idx[:n]))
    if dcfg.get("test_images"):
        _require([dcfg["test_images"], dcfg["test_labels"]])
        test = load_mnist(dcfg["test_images"], dcfg["test_labels"])
    else:
        test = full.take(np.sort(idx[n:]))
    if dcfg.get("test_size") and dcfg["test_size"] < test.n:
        test = subsample(test, dcfg["test_size"], stream(cfg, "mnist-test", *labels))
    return data, test, "test_accuracy"


def evaluate(params, test: Dataset | None, metric: str | None) -> float | None:
    if test is None:
        return None
    if metric == "test_accuracy":
        return 1.0 - zero_one_risk(params, test)
    return float(0.5 * np.mean((forward_truncated(params, test.X) - test.y) ** 2))


def _loss_and_scale(lcfg: dict, data: Dataset) -> tuple[LossSpec, float]:
    if lcfg.get("kind", "squared") == "squared":
        return LossSpec(), 1.0
    noise = data.meta.get("noise") or {}
    bn = b_n(noise.get("tau0", 0.0), noise.get("sigma", 0.0), data.n)
    B = bn if lcfg.get("B", "auto") == "auto" else float(lcfg["B"])
    return LossSpec("truncated", B), bn


# ---------------------------------------------------------------- train

def run_train(cfg: dict) -> dict:
    out = _outdir(cfg)
    data, test, metric = build_data(cfg["data"], cfg)
    loss, b_scale = _loss_and_scale(cfg["loss"], data)
    tc = train_config(cfg["train"], stream(cfg, "train-batches"), b_scale=b_scale)
    model = train(data, cfg["m"], loss, tc, InitSpec(cfg["kappa"], stream(cfg, "init")))
    h = config_hash(cfg)
    save_params(
        model.params, out / "model.bin", kappa=cfg["kappa"], seed=int(cfg["seed"]),
        lam=model.lam, loss=loss.kind, B=loss.B, config_sha256=h,
    )
    export_csv(model.history_table(), out / "history.csv")
    export_csv(data, out / "train_data.csv")
    report = bounds.make_report(model, data, cfg["delta"])
    report.provenance = {"config_sha256": h}
    (out / "report.json").write_text(report.dumps())
    (out / "report.txt").write_text(report.render())
    summary = {
        "config_sha256": h,
        "n": data.n,
        "d": data.d,
        "m": cfg["m"],
        "lambda": model.lam,
        "final": dict(zip(("step", "lr", "emp_risk", "path_norm", "J_lambda"), model.history[-1].tolist())),
        "path_norm_over_sqrt_n": path_norm(model.params) / math.sqrt(data.n),
        "posterior_gap_bound": report.total_posterior_gap,
    }
    if test is not None:
        summary[metric] = evaluate(model.params, test, metric)
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- rate study

def _rate_context(cfg: dict, d: int, rep: int, n: int):
    if cfg["target"]["direction"] == "random":
        target = TargetSpec(one_neuron(d, sample_l1_sphere(d, stream(cfg, "rate-direction", d, rep))))
    else:
        target = TargetSpec(one_neuron(d))
    # a fresh test sample per cell, on a stream disjoint from the training draw
    Xt = uniform_cube(cfg["test_size"], d, stream(cfg, "rate-test", d, rep, n))
    return target, Xt, target.rep.eval(Xt)


def _risk_and_stderr(pred, truth) -> tuple[float, float]:
    losses = 0.5 * (pred - truth) ** 2
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(losses.size))


def _jittered(K: np.ndarray) -> np.ndarray:
    K = K.copy()
    K[np.diag_indices_from(K)] += JITTER * np.trace(K) / K.shape[0]
    return K


def rate_cell(cfg: dict, d: int, rep: int, n: int) -> list[dict]:
    target, Xt, ft = _rate_context(cfg, d, rep, n)
    data = synth(target, n, d, stream(cfg, "rate-train", d, rep, n))
    records = []
    if "nn" in cfg["methods"]:
        nn = cfg["nn"]
        t0 = time.perf_counter()
        tc = train_config(nn["train"], stream(cfg, "rate-batches", d, rep, n))
        model = train(data, nn["m"], LossSpec(), tc, InitSpec(nn["kappa"], stream(cfg, "rate-init", d, rep, n)))
        risk, se = _risk_and_stderr(forward_truncated(model.params, Xt), ft)
        log.info("rate d=%d rep=%d n=%d nn risk=%.3e (%.1fs)", d, rep, n, risk, time.perf_counter() - t0)
        records.append({"d": d, "repeat": rep, "method": "nn", "n": n, "risk": risk, "stderr": se, "ridge": 0.0})
    if "krr" in cfg["methods"]:
        kc = cfg["krr"]
        kern = RandomFeatureKernel.sample(d, kc["M"], stream(cfg, "rate-kernel", d, rep))
        perm = stream(cfg, "rate-holdout", d, rep, n).generator().permutation(n)
        n_hold = max(1, int(round(kc["holdout"] * n)))
        hold, fit = perm[:n_hold], perm[n_hold:]
        K0 = gram(kern, data.X, jitter=False)
        K_fit = _jittered(K0[np.ix_(fit, fit)])
        scores = []
        for ridge in kc["ridges"]:
            mod = KrrModel(krr_solve(K_fit, data.y[fit], ridge), data.X[fit], kern, ridge)
            scores.append(float(np.mean((krr_predict(mod, data.X[hold]) - data.y[hold]) ** 2)))
        ridge = kc["ridges"][int(np.argmin(scores))]
        mod = KrrModel(krr_solve(_jittered(K0), data.y, ridge), data.X, kern, ridge)
        risk, se = _risk_and_stderr(krr_predict(mod, Xt), ft)
        log.info("rate d=%d rep=%d n=%d krr risk=%.3e ridge=%g", d, rep, n, risk, ridge)
        records.append({"d": d, "repeat": rep, "method": "krr", "n": n, "risk": risk, "stderr": se, "ridge": ridge})
    return records


def rate_summary(records: list[dict], stderr_exclusion: float = 0.2) -> dict:
    """Fit decay exponents per ``(d, repeat, method)`` and take medians over repeats.

    The smallest ``n`` is dropped when its risk estimate has a standard error
    above ``stderr_exclusion`` times its value.
    """
    groups: dict = {}
    for r in records:
        groups.setdefault((r["d"], r["repeat"]), {}).setdefault(r["method"], []).append(r)
    fits = []
    for (d, rep), by_method in sorted(groups.items()):
        row = {"d": d, "repeat": rep, "beta_nn": None, "beta_ker": None, "excluded": []}
        for method, recs in sorted(by_method.items()):
            recs = sorted(recs, key=lambda r: r["n"])
            if len(recs) > 2 and recs[0]["stderr"] > stderr_exclusion * recs[0]["risk"]:
                log.info("excluding n=%d for d=%d rep=%d %s (stderr %.2g of risk %.2g)",
                         recs[0]["n"], d, rep, method, recs[0]["stderr"], recs[0]["risk"])
                row["excluded"].append({"method": method, "n": recs[0]["n"]})
                recs = recs[1:]
            beta, _ = loglog_slope([(r["n"], r["risk"]) for r in recs])
            row["beta_nn" if method == "nn" else "beta_ker"] = beta
        fits.append(row)
    medians = {}
    for d in sorted({f["d"] for f in fits}):
        rows = [f for f in fits if f["d"] == d]
        med = {}
        for key in ("beta_nn", "beta_ker"):
            vals = [f[key] for f in rows if f[key] is not None]
            med[key] = float(np.median(vals)) if vals else None
        medians[str(d)] = med
    return {"fits": fits, "median": medians}


def run_rate_study(cfg: dict, evaluate_cell=None) -> dict:
    """``evaluate_cell(d, repeat, n)`` may replace training to inject a risk table."""
    out = _outdir(cfg)
    cells = [(d, rep, n) for d in cfg["d_list"] for rep in range(cfg["repeats"]) for n in cfg["n_grid"]]
    if evaluate_cell is None:
        results = _pmap(rate_cell, [(cfg, *c) for c in cells], cfg["threads"])
    else:
        results = [evaluate_cell(*c) for c in cells]
    records = [r for cell in results for r in cell]
    header = ["d", "repeat", "method", "n", "risk", "stderr", "ridge"]
    export_csv((header, [[r[h] for h in header] for r in records]), out / "rates.csv")
    summary = rate_summary(records, cfg["stderr_exclusion"])
    export_csv(
        (["d", "repeat", "beta_nn", "beta_ker"],
         [[f["d"], f["repeat"], "" if f["beta_nn"] is None else f["beta_nn"],
           "" if f["beta_ker"] is None else f["beta_ker"]] for f in summary["fits"]]),
        out / "rate_summary.csv",
    )
    summary["config_sha256"] = config_hash(cfg)
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- width / init sweeps

def width_cell(cfg: dict, m: int, mode: str) -> dict:
    data, test, metric = build_data(cfg["data"], cfg)
    tc = train_config(cfg["train"], stream(cfg, "width-batches", m), lam=_mode_lam(cfg["train"], mode))
    t0 = time.perf_counter()
    model = train(data, m, LossSpec(), tc, InitSpec(cfg["kappa"], stream(cfg, "width-init", m)))
    pn = path_norm(model.params) / math.sqrt(data.n)
    log.info("width m=%d %s: path_norm/sqrt(n)=%.4g (%.1fs)", m, mode, pn, time.perf_counter() - t0)
    return {"m": m, "lambda_mode": mode, "path_norm_over_sqrt_n": pn, metric: evaluate(model.params, test, metric)}


def run_width_sweep(cfg: dict) -> dict:
    out = _outdir(cfg)
    cells = [(m, mode) for m in cfg["m_grid"] for mode in MODES]
    rows = _pmap(width_cell, [(cfg, *c) for c in cells], cfg["threads"])
    metric = [k for k in rows[0] if k.startswith("test_")][0]
    header = ["m", "lambda_mode", "path_norm_over_sqrt_n", metric]
    export_csv((header, [[r[h] for h in header] for r in rows]), out / "width.csv")
    summary = {"config_sha256": config_hash(cfg), "metric": metric}
    for mode in MODES:
        vals = [r["path_norm_over_sqrt_n"] for r in rows if r["lambda_mode"] == mode]
        summary[mode] = {
            "path_norm_over_sqrt_n": vals,
            "max_over_min": max(vals) / min(vals) if min(vals) > 0 else None,
            "last_over_first": vals[-1] / vals[0] if vals[0] > 0 else None,
        }
    _write_json(out / "summary.json", summary)
    return summary


def init_cell(cfg: dict, kappa: float, mode: str, rep: int) -> dict:
    data, test, metric = build_data(cfg["data"], cfg, "init-repeat", rep)
    tc = train_config(cfg["train"], stream(cfg, "init-batches", kappa, rep), lam=_mode_lam(cfg["train"], mode))
    model = train(data, cfg["m"], LossSpec(), tc, InitSpec(kappa, stream(cfg, "init-init", kappa, rep)))
    value = evaluate(model.params, test, metric)
    log.info("init kappa=%g %s rep=%d: %s=%.4g", kappa, mode, rep, metric, value)
    return {"kappa": kappa, "lambda_mode": mode, "repeat": rep, "metric": metric, "value": value}


def run_init_sweep(cfg: dict) -> dict:
    out = _outdir(cfg)
    cells = [(k, mode, r) for k in cfg["kappa_grid"] for mode in MODES for r in range(cfg["repeats"])]
    results = _pmap(init_cell, [(cfg, *c) for c in cells], cfg["threads"])
    metric = results[0]["metric"]
    table = []
    for kappa in cfg["kappa_grid"]:
        for mode in MODES:
            vals = np.array([r["value"] for r in results if r["kappa"] == kappa and r["lambda_mode"] == mode])
            table.append({"kappa": kappa, "lambda_mode": mode, "mean_metric": float(vals.mean()),
                          "std_metric": float(vals.std())})
    header = ["kappa", "lambda_mode", "mean_metric", "std_metric"]
    export_csv((header, [[r[h] for h in header] for r in table]), out / "init.csv")
    summary = {"config_sha256": config_hash(cfg), "metric": metric, "cells": table}
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- mnist

def mnist_cell(cfg: dict, mode: str, n: int, rep: int) -> dict:
    dcfg = {"source": "mnist", "n": n, "test_size": cfg["test_size"]}
    for key in ("images", "labels", "test_images", "test_labels"):
        if cfg.get(key):
            dcfg[key] = cfg[key]
    data, test, _ = build_data(dcfg, cfg, "mnist", n, rep)
    tc = train_config(cfg["train"], stream(cfg, "mnist-batches", n, rep), lam=_mode_lam(cfg["train"], mode))
    t0 = time.perf_counter()
    model = train(data, cfg["m"], LossSpec(), tc, InitSpec(cfg["kappa"], stream(cfg, "mnist-init", n, rep)))
    row = {
        "lambda_mode": mode,
        "lambda": model.lam,
        "n": n,
        "repeat": rep,
        "train_accuracy": 1.0 - zero_one_risk(model.params, data),
        "test_accuracy": 1.0 - zero_one_risk(model.params, test),
        "path_norm_over_sqrt_n": path_norm(model.params) / math.sqrt(n),
    }
    log.info("mnist %s n=%d rep=%d: %s (%.1fs)", mode, n, rep, row, time.perf_counter() - t0)
    return row


def run_mnist_bench(cfg: dict) -> dict:
    paths = [cfg["images"], cfg["labels"]] + [cfg[k] for k in ("test_images", "test_labels") if cfg.get(k)]
    _require(paths)
    for key, digest in cfg.get("checksums", {}).items():
        verify_sha256(cfg[key], digest)
    out = _outdir(cfg)
    cells = [(c["lambda_mode"], c["n"], r) for c in cfg["cells"] for r in range(cfg["repeats"])]
    rows = _pmap(mnist_cell, [(cfg, *c) for c in cells], cfg["threads"])
    table = []
    for c in cfg["cells"]:
        sel = [r for r in rows if r["lambda_mode"] == c["lambda_mode"] and r["n"] == c["n"]]
        agg = {"dataset": "MNIST", "lambda_mode": c["lambda_mode"], "lambda": sel[0]["lambda"], "n": c["n"]}
        for key in ("train_accuracy", "test_accuracy", "path_norm_over_sqrt_n"):
            agg[key] = float(np.mean([r[key] for r in sel]))
        table.append(agg)
    header = ["dataset", "lambda_mode", "lambda", "n", "train_accuracy", "test_accuracy", "path_norm_over_sqrt_n"]
    export_csv((header, [[r[h] for h in header] for r in table]), out / "mnist_bench.csv")
    summary = {"config_sha256": config_hash(cfg), "cells": table}
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- bound report

def run_bound_report(cfg: dict) -> bounds.BoundReport:
    out = _outdir(cfg)
    _require([cfg["model"], cfg["data"]])
    params = load_params(cfg["model"])
    sidecar_path = Path(cfg["model"] + ".json")
    sidecar = json.loads(sidecar_path.read_text()) if sidecar_path.is_file() else {}
    data = load_dataset_csv(cfg["data"])
    if "loss" in cfg:
        lcfg = cfg["loss"]
    else:
        lcfg = {"kind": sidecar.get("loss", "squared"), "B": sidecar.get("B", 1.0)}
    loss, _ = _loss_and_scale(lcfg, data)
    model = SimpleNamespace(params=params, loss=loss, lam=sidecar.get("lam", 0.0))
    report = bounds.make_report(model, data, cfg["delta"], cfg.get("gamma2"))
    report.provenance = {"config_sha256": config_hash(cfg), "model": cfg["model"], "data": cfg["data"]}
    (out / "report.json").write_text(report.dumps())
    (out / "report.txt").write_text(report.render())
    return report


RUNNERS = {
    "train": run_train,
    "rate-study": run_rate_study,
    "width-sweep": run_width_sweep,
    "init-sweep": run_init_sweep,
    "mnist-bench": run_mnist_bench,
    "bound-report": run_bound_report,
}
