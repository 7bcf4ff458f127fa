"""Experiment stages driven by a validated config dict.

Output layout under ``out``::

    data/<K..._L...>/rep<r>/series.csv, truth.json
    runs/<scenario>/<variant>/rep<r>/n<n>/checkpoint.json, history.csv
    runs/<scenario>/<variant>/rep<r>/selected.json
    reports/<scenario>/<variant>/rep<r>.json, .csv, _predictions.csv; reports/summary.csv
    interpret/runs.csv, interpret/summary.csv, interpret/<scenario>/<variant>/rep<r>_A.csv
    bench/timing.csv, bench/realizations.csv
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, datagen, models, training
from . import evaluation as ev
from .config import ConfigError, Scenario, derive_seed, scenarios
from .dataio import DataError

log = logging.getLogger(__name__)


def _data_dir(out: Path, sc: Scenario, rep: int) -> Path:
    return out / "data" / f"K{sc.K}_L{sc.L}" / f"rep{rep}"


def _run_dir(out: Path, sc: Scenario, variant: str, rep: int) -> Path:
    return out / "runs" / sc.name / variant / f"rep{rep}"


def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(v: float) -> str:
    return format(float(v), ".17g")


# --- generate ------------------------------------------------------------------


def data_keys(cfg: dict) -> list[tuple[int, int]]:
    return sorted({(sc.K, sc.L) for sc in scenarios(cfg)})


def generate_one(cfg: dict, K: int, L: int, rep: int):
    d = cfg["data"]
    seed = derive_seed(cfg["seed"], "data", d["source"], K, L, rep)
    if d["source"] == "henon":
        return datagen.gen_henon_chain(K, L, d["coupling"], d["burn_in"], seed)
    network = datagen.gen_er_network(K, d["P"], d["density"], seed)
    return datagen.gen_var(network, L, d["burn_in"], seed), network


def cmd_generate(cfg: dict, out: Path) -> list[Path]:
    if cfg["data"]["source"] == "csv":
        log.info("csv source: nothing to generate")
        return []
    written = []
    for K, L in data_keys(cfg):
        for rep in range(cfg["repetitions"]):
            try:
                series, truth = generate_one(cfg, K, L, rep)
            except datagen.GenerationError as exc:
                raise datagen.GenerationError(f"K={K}, L={L}, rep={rep}: {exc}") from None
            d = _data_dir(out, Scenario(K, L, 0), rep)
            d.mkdir(parents=True, exist_ok=True)
            dataio.write_csv(d / "series.csv", series)
            truth.save(d / "truth.json")
            written += [d / "series.csv", d / "truth.json"]
    return written


# --- datasets --------------------------------------------------------------------


def prepare(cfg: dict, out: Path, sc: Scenario, rep: int):
    """Preprocessed dataset, target column indices and ground truth (if any)."""
    d, pre = cfg["data"], cfg["preprocess"]
    truth = None
    if d["source"] == "csv":
        values, columns = dataio.load_csv(d["path"])
    else:
        folder = _data_dir(out, sc, rep)
        if not (folder / "series.csv").exists():
            raise DataError(f"missing {folder / 'series.csv'}; run `generate` first")
        values, columns = dataio.load_csv(folder / "series.csv")
        truth = datagen.CouplingNetwork.load(folder / "truth.json")
    targets = list(columns) if d["targets"] == "all" else list(d["targets"])
    unknown = [t for t in targets if t not in columns]
    if unknown:
        raise ConfigError(f"targets {unknown} not among data columns")
    if pre["interpolate"] and np.isnan(values).any():
        values = dataio.linear_interpolate_missing(values)
    if np.isnan(values).any():
        raise DataError("series has missing values and interpolation is disabled")
    if pre["max_zeros"] is not None or pre["drop_constant"]:
        values, columns = dataio.drop_sparse_or_constant(
            values, columns, targets, pre["max_zeros"], pre["drop_constant"])
        if truth is not None and len(columns) != truth.K:
            truth = None  # column indices no longer line up with the generator's variables
    if pre["moving_average"]:
        values = dataio.moving_average(values, pre["moving_average"])
    ds = dataio.split(values, columns, pre["fractions"], pre.get("counts"))
    if pre["zscore"]:
        ds = dataio.zscore(ds)
    return ds, ds.column_index(targets), truth


def poison_test_rows(ds: dataio.Dataset) -> dataio.Dataset:
    """Replace test rows by NaN; any read of them during training then aborts the run."""
    values = np.array(ds.values)
    values[ds.bounds[1]:] = np.nan
    return dataio.Dataset(values, ds.columns, ds.bounds, ds.mean, ds.std)


# --- train -------------------------------------------------------------------------


def neuron_candidates(cfg: dict, variant: str) -> list[int]:
    tr = cfg["train"]
    if variant in models.LAVARNET_VARIANTS:
        return list(tr.get("grid") or [tr["n"]])
    return [tr.get("baseline_n", tr["n"])]


def train_config(cfg: dict, variant: str, n: int, seed: int, epochs: int | None = None) -> training.TrainConfig:
    tr = cfg["train"]
    return training.default_config(
        variant, n=n, epochs=epochs or tr["epochs"], batch_size=tr["batch_size"],
        eta_max=tr["eta_max"], eta_min=tr["eta_min"], lr_constant=tr["lr_constant"], seed=seed)


def model_seed(cfg: dict, sc: Scenario, variant: str, rep: int, n: int) -> int:
    return derive_seed(cfg["seed"], "model", sc.name, variant, rep, n)


def write_history(history: training.TrainHistory, path: Path) -> None:
    _write_rows(path, ["epoch", "train_loss", "val_loss", "lr"],
                [[e, _g(tr), _g(va), _g(lr)] for e, tr, va, lr in history.rows()])


def train_job(cfg: dict, out: str, sc: Scenario, variant: str, rep: int, n: int, audit: bool = False) -> dict:
    ds, targets, _ = prepare(cfg, Path(out), sc, rep)
    if audit:
        ds = poison_test_rows(ds)
    w = dataio.make_windows(ds, sc.T, targets)
    config = train_config(cfg, variant, n, model_seed(cfg, sc, variant, rep, n))
    history = training.train(w["train"], w["val"], config)
    folder = _run_dir(Path(out), sc, variant, rep) / f"n{n}"
    folder.mkdir(parents=True, exist_ok=True)
    models.save_checkpoint(history.best_params, folder / "checkpoint.json")
    write_history(history, folder / "history.csv")
    return {"scenario": sc.name, "variant": variant, "rep": rep, "n": n,
            "best_val_loss": history.best_val_loss, "best_epoch": history.best_epoch}


def training_jobs(cfg: dict):
    for sc in scenarios(cfg):
        for variant in cfg["variants"]:
            if variant not in models.NEURAL_VARIANTS:
                continue
            for rep in range(cfg["repetitions"]):
                for n in neuron_candidates(cfg, variant):
                    yield sc, variant, rep, n


def cmd_train(cfg: dict, out: Path, jobs: int = 1, audit: bool = False) -> list[dict]:
    todo = list(training_jobs(cfg))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(train_job, cfg, str(out), *job, audit) for job in todo]
            results = [f.result() for f in futures]
    else:
        results = [train_job(cfg, str(out), *job, audit) for job in todo]
    # selection happens after every candidate has finished
    by_run: dict[tuple, list[dict]] = {}
    for r in results:
        by_run.setdefault((r["scenario"], r["variant"], r["rep"]), []).append(r)
    for sc in scenarios(cfg):
        for variant in cfg["variants"]:
            for rep in range(cfg["repetitions"]):
                runs = by_run.get((sc.name, variant, rep))
                if not runs:
                    continue
                best = min(runs, key=lambda r: (r["best_val_loss"], r["n"]))
                path = _run_dir(out, sc, variant, rep) / "selected.json"
                path.write_text(json.dumps({"n": best["n"], "best_val_loss": best["best_val_loss"],
                                            "best_epoch": best["best_epoch"]}, indent=2) + "\n")
    return results


# --- evaluate ----------------------------------------------------------------------


def load_selected(out: Path, sc: Scenario, variant: str, rep: int) -> models.ModelParams:
    folder = _run_dir(out, sc, variant, rep)
    try:
        n = json.loads((folder / "selected.json").read_text())["n"]
    except FileNotFoundError:
        raise DataError(f"no trained model in {folder}; run `train` first") from None
    return models.load_checkpoint(folder / f"n{n}" / "checkpoint.json")


def predict_test(cfg: dict, out: Path, sc: Scenario, variant: str, rep: int, ds, targets):
    w = dataio.make_windows(ds, sc.T, targets)
    if variant == "knn":
        pred = models.knn_predict(w["test"].X, w["train"].X, w["train"].Y, cfg["train"]["knn_neighbors"])
        return pred, w["test"], None
    params = load_selected(out, sc, variant, rep)
    if params.dims[1:] != (sc.T, len(ds.columns), len(targets)):
        raise DataError(f"checkpoint dims {params.dims} do not match data for {sc.name}/{variant}/rep{rep}")
    return models.predict(w["test"].X, params), w["test"], params


def evaluate_run(cfg: dict, out: Path, sc: Scenario, variant: str, rep: int,
                 predictions_path: Path | None = None) -> ev.EvalReport:
    ds, targets, truth = prepare(cfg, out, sc, rep)
    pred, test, params = predict_test(cfg, out, sc, variant, rep, ds, targets)
    if predictions_path is not None:
        dataio.write_predictions(predictions_path, test.target_rows, [ds.columns[i] for i in targets],
                                 ds.denormalize(test.Y, targets), ds.denormalize(pred, targets))
    mae_norm = ev.mae_per_target(pred, test.Y)
    mae_orig = ev.mae_per_target(ds.denormalize(pred, targets), ds.denormalize(test.Y, targets))
    meta = {"scenario": sc.name, "variant": variant, "rep": rep, "T": sc.T, "seed": cfg["seed"],
            "n": params.n if params is not None else None}
    report = ev.EvalReport([ds.columns[i] for i in targets], list(mae_norm), list(mae_orig), meta=meta)
    if params is not None and variant in models.LAVARNET_VARIANTS:
        report.A = list(params["A"])
        if truth is not None:
            ids = [i + 1 for i in targets]
            report.r_l = ev.score_RL(truth, report.A, ids)
            report.r_v = ev.score_RV(truth, report.A, ids)
            report.r_l_per_target, report.r_v_per_target = ev.per_target_scores(truth, report.A, ids)
    return report


def cmd_evaluate(cfg: dict, out: Path) -> Path:
    rows = []
    for sc in scenarios(cfg):
        for variant in cfg["variants"]:
            maes = []
            for rep in range(cfg["repetitions"]):
                folder = out / "reports" / sc.name / variant
                folder.mkdir(parents=True, exist_ok=True)
                report = evaluate_run(cfg, out, sc, variant, rep, folder / f"rep{rep}_predictions.csv")
                ev.emit_report(report, folder / f"rep{rep}")
                maes.append(report.mean_mae_orig)
            mean, std = ev.mean_std(maes)
            rows.append([sc.name, variant, len(maes), _g(mean), _g(std)])
    path = out / "reports" / "summary.csv"
    _write_rows(path, ["scenario", "model", "runs", "mae_mean", "mae_std"], rows)
    return path


# --- interpret -----------------------------------------------------------------------


def write_A(path: Path, A, columns, targets) -> None:
    T = np.shape(A[0])[0]
    rows = []
    for k, A_k in zip(targets, A):
        for t in range(1, T + 1):
            rows.append([k, t, ev.row_to_lag(t, T)] + [_g(v) for v in A_k[t - 1]])
    _write_rows(path, ["target", "row", "lag"] + list(columns), rows)


def cmd_interpret(cfg: dict, out: Path, dump_A: bool = True) -> Path:
    run_rows, summary = [], []
    for sc in scenarios(cfg):
        for variant in cfg["variants"]:
            if variant not in models.LAVARNET_VARIANTS:
                continue
            r_ls, r_vs = [], []
            for rep in range(cfg["repetitions"]):
                ds, targets, truth = prepare(cfg, out, sc, rep)
                if truth is None:
                    raise DataError(f"no ground-truth file for {sc.name} rep{rep}")
                ids = [i + 1 for i in targets]
                A = list(load_selected(out, sc, variant, rep)["A"])
                r_l, r_v = ev.score_RL(truth, A, ids), ev.score_RV(truth, A, ids)
                r_ls.append(r_l)
                r_vs.append(r_v)
                run_rows.append([sc.name, variant, rep, _g(r_l), _g(r_v)])
                if dump_A:
                    write_A(out / "interpret" / sc.name / variant / f"rep{rep}_A.csv", A, ds.columns,
                            [ds.columns[i] for i in targets])
            summary.append([sc.name, variant, len(r_ls), _g(np.mean(r_ls)), _g(np.mean(r_vs))])
    _write_rows(out / "interpret" / "runs.csv", ["scenario", "model", "rep", "r_l", "r_v"], run_rows)
    path = out / "interpret" / "summary.csv"
    _write_rows(path, ["scenario", "model", "runs", "r_l_mean", "r_v_mean"], summary)
    return path


# --- bench -----------------------------------------------------------------------------


def cmd_bench(cfg: dict, out: Path) -> Path:
    """Wall-clock time of initialization + training per model on the first scenario, rep 0."""
    sc = scenarios(cfg)[0]
    ds, targets, _ = prepare(cfg, out, sc, 0)
    w = dataio.make_windows(ds, sc.T, targets)
    epochs = cfg["bench"]["epochs"]
    per_run, summary = [], []
    for variant in cfg["variants"]:
        seconds = []
        for r in range(cfg["bench"]["realizations"]):
            start = time.perf_counter()
            if variant == "knn":
                pred = models.knn_predict(w["val"].X, w["train"].X, w["train"].Y, cfg["train"]["knn_neighbors"])
                val_loss = training.mse_loss(pred, w["val"].Y)
            else:
                n = neuron_candidates(cfg, variant)[0]
                config = train_config(cfg, variant, n, model_seed(cfg, sc, variant, 0, n), epochs)
                val_loss = training.train(w["train"], w["val"], config).best_val_loss
            seconds.append(time.perf_counter() - start)
            per_run.append([variant, r, _g(val_loss), f"{seconds[-1]:.6f}"])
        summary.append([variant, len(seconds), f"{np.mean(seconds):.6f}", f"{np.std(seconds):.6f}"])
    _write_rows(out / "bench" / "realizations.csv", ["model", "realization", "best_val_loss", "seconds"], per_run)
    path = out / "bench" / "timing.csv"
    _write_rows(path, ["model", "realizations", "mean_seconds", "std_seconds"], summary)
    return path
