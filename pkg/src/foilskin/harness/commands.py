"""The five pipeline stages behind the command line.

Output layout under ``--out``::

    data/       capacitance.csv, markers.csv
    model/      model.json, baseline.csv, train_loss.csv, dataset.json
    evaluate/   sensor_error.csv, sensor_error.json
    control/    records/<profile>.csv, step.csv, grid.csv, grid.json, summary.json
    report/     *.png, report.json

Each stage directory gets a ``manifest.json`` (config hash, seeds, versions,
file hashes).  Stages read their inputs from the sibling directories.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
from pathlib import Path

import numpy as np

from .. import __version__
from ..control import LoopRun, SetpointProfile, load_record, run_closed_loop_batch, write_record
from ..errors import DataError
from ..estimator import load_model, mlp_init, estimate_points, save_model, train
from ..geometry import markers_to_camber_batch
from ..ingestion import (load_capacitance_log, load_marker_log, write_capacitance_log,
                         write_manifest, write_marker_log)
from ..metrics import grid_table, plateau_errors, sensor_error_stats, step_rise_times, write_grid
from ..protocol import build_dataset, generate_training_logs
from ..sensing import BaselineReference
from ..streams import CAPACITANCE_COLUMNS
from .config import RunConfig

log = logging.getLogger("foilskin")

STAGES = ("data", "model", "evaluate", "control", "report")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def stage_dir(out, name: str) -> Path:
    path = Path(out) / name
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def write_stage_manifest(folder: Path, command: str, cfg: RunConfig, **extra) -> None:
    files = sorted(p for p in folder.rglob("*") if p.is_file() and p.name != "manifest.json")
    doc = {
        "command": command,
        "config_sha256": cfg.digest,
        "seeds": cfg.seeds(),
        "versions": {"foilskin": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "files": {str(p.relative_to(folder)): _sha256(p) for p in files},
        **extra,
    }
    (folder / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (folder / "config.ini").write_text(cfg.canonical())


def _nanstat(fn, a, axis=None):
    """``fn`` over finite entries; NaN (without a warning) where there are none."""
    a = np.asarray(a, dtype=float)
    ok = np.isfinite(a)
    if axis is None:
        return float(fn(a[ok])) if ok.any() else float("nan")
    return np.array([_nanstat(fn, col) for col in np.moveaxis(a, axis, -1)])


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise DataError(f"missing {path}; run `{hint}` first")
    return path


# -- generate ---------------------------------------------------------------------

def cmd_generate(cfg: RunConfig, out) -> Path:
    folder = stage_dir(out, "data")
    log.info("simulating %.0f s of training actuation", cfg.protocol.duration)
    logs = generate_training_logs(cfg.protocol, cfg.plant, cfg.skin, cfg.seed_for("protocol"))
    write_capacitance_log(folder / "capacitance.csv", logs.capacitance)
    write_marker_log(folder / "markers.csv", logs.markers)
    write_stage_manifest(folder, "generate", cfg, frames=len(logs.capacitance),
                         marker_sets=len(logs.markers), baseline_end=logs.baseline_end)
    log.info("wrote %d capacitance frames and %d marker sets to %s",
             len(logs.capacitance), len(logs.markers), folder)
    return folder


# -- train ------------------------------------------------------------------------

def load_dataset(cfg: RunConfig, out):
    data = Path(out) / "data"
    cap = load_capacitance_log(_require(data / "capacitance.csv", "generate"))
    markers = load_marker_log(_require(data / "markers.csv", "generate"))
    return build_dataset(cap, markers, cfg.protocol.baseline, cfg.plant, cfg.seed_for("split"),
                         cfg.tolerance)


def write_baseline(path: Path, ref: BaselineReference) -> None:
    path.write_text(",".join(CAPACITANCE_COLUMNS[1:]) + "\n"
                    + ",".join(f"{v:.17g}" for v in ref.values) + "\n")


def load_baseline(path: Path) -> BaselineReference:
    rows = Path(path).read_text().split()
    if len(rows) != 2 or rows[0] != ",".join(CAPACITANCE_COLUMNS[1:]):
        raise DataError(f"{path}: malformed baseline file")
    try:
        return BaselineReference(np.array([float(v) for v in rows[1].split(",")]))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_train(cfg: RunConfig, out) -> Path:
    dataset, ref, pairs = load_dataset(cfg, out)
    folder = stage_dir(out, "model")
    log.info("training on %d/%d/%d pairs (%d dropped)", len(dataset.train), len(dataset.val),
             len(dataset.test), pairs.dropped)
    model, report = train(mlp_init(seed=cfg.seed_for("init")), dataset, cfg.train)
    save_model(model, folder / "model.json")
    write_baseline(folder / "baseline.csv", ref)
    with (folder / "train_loss.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "train_loss", "val_loss"))
        w.writerows((e, f"{tr:.9g}", f"{va:.9g}") for e, tr, va in report.rows())
    write_manifest(folder / "dataset.json", dataset, aligned=len(pairs))
    write_stage_manifest(folder, "train", cfg, epochs_run=len(report.train_loss),
                         best_epoch=report.best_epoch, best_val_loss=report.best_val_loss,
                         initial_val_loss=report.initial_val_loss,
                         stopped_early=report.stopped_early)
    log.info("best validation loss %.3e at epoch %d (initial %.3e)", report.best_val_loss,
             report.best_epoch, report.initial_val_loss)
    return folder


def load_trained(out):
    folder = Path(out) / "model"
    model = load_model(_require(folder / "model.json", "train"))
    return model, load_baseline(_require(folder / "baseline.csv", "train"))


# -- evaluate ---------------------------------------------------------------------

def cmd_evaluate(cfg: RunConfig, out) -> Path:
    model, _ = load_trained(out)
    dataset, _, _ = load_dataset(cfg, out)
    x, y = dataset.part("test")
    if len(x) == 0:
        raise DataError("test split is empty")
    est = estimate_points(model, x)
    truth = y.reshape(-1, 5, 2) * dataset.scale
    camber = markers_to_camber_batch(truth, cfg.plant.geometry)
    report = sensor_error_stats(est, truth, camber, foil_length=cfg.plant.chord)
    folder = stage_dir(out, "evaluate")
    with (folder / "sensor_error.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("camber_bucket", "count", "mean", "std", "max", "min", "marker_mean"))
        for key, n, *vals in report.rows():
            w.writerow((key, n, *(f"{v:.6f}" for v in vals)))
        o = report.overall
        w.writerow(("all", o.count, *(f"{v:.6f}" for v in (o.mean, o.std, o.max, o.min,
                                                           report.marker_overall.mean))))
    (folder / "sensor_error.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    write_stage_manifest(folder, "evaluate", cfg, test_pairs=len(x))
    log.info("tip error mean %.3f %% max %.3f %% of foil length over %d held-out pairs",
             report.overall.mean, report.overall.max, len(x))
    return folder


# -- control ----------------------------------------------------------------------

def suite_runs(cfg: RunConfig) -> list[LoopRun]:
    """Step trials first, then the tracking grid (waveform, amplitude, period)."""
    c = cfg.control
    step = SetpointProfile("step")
    runs = [LoopRun(step, step.step_dwell * (step.n_steps + 1), cfg.seed_for(f"control/step/{i}"),
                    c.feedback) for i in range(c.step_trials)]
    for kind in c.waveforms:
        for amp in c.amplitudes:
            for period in c.periods:
                prof = SetpointProfile(kind, c.mean, amp, period)
                runs.append(LoopRun(prof, c.cycles * period, cfg.seed_for(f"control/{prof.label}"),
                                    c.feedback))
    return runs


def cmd_control(cfg: RunConfig, out) -> Path:
    model, ref = load_trained(out)
    runs = suite_runs(cfg)
    dt = cfg.control.dt or cfg.plant.dt
    log.info("running %d closed-loop experiments", len(runs))
    records = run_closed_loop_batch(runs, cfg.plant, cfg.skin, model, dt, baseline=ref)
    n_step = cfg.control.step_trials
    steps, grid = records[:n_step], records[n_step:]
    folder = stage_dir(out, "control")
    rec_dir = folder / "records"
    rec_dir.mkdir(exist_ok=True)
    for r in [steps[0]] + grid:
        write_record(rec_dir / f"{r.profile.label}.csv", r)

    schedule = steps[0].profile.step_times()
    rise = np.array([step_rise_times(r.t, r.truth, schedule) for r in steps])
    plateau = np.array([plateau_errors(r.t, r.setpoint, r.truth, schedule) for r in steps])
    with (folder / "step.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "time", "from", "to", "rise_time_mean", "rise_time_std"))
        for k, (ts, lo, hi) in enumerate(schedule):
            w.writerow((k + 1, f"{ts:g}", f"{lo:g}", f"{hi:g}", f"{_nanstat(np.mean, rise[:, k]):.6f}",
                        f"{_nanstat(np.std, rise[:, k]):.6f}"))
    rows = grid_table(grid)
    write_grid(rows, folder / "grid.csv", folder / "grid.json")
    summary = {
        "rise_time_mean": _nanstat(np.mean, rise),
        "rise_time_per_step": [float(v) for v in _nanstat(np.mean, rise, axis=0)],
        "plateau_error_mean": [float(v) for v in plateau.mean(axis=0)],
        "plateau_error_max_abs": float(np.max(np.abs(plateau))),
        "steps_incomplete": int(np.count_nonzero(~np.isfinite(rise))),
        "step_trials": n_step,
        "grid": rows,
        "feedback": cfg.control.feedback,
        "dt": dt,
    }
    (folder / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    write_stage_manifest(folder, "control", cfg, run_seeds={
        f"{r.profile.label}#{i}" if r.profile.kind == "step" else r.profile.label: r.seed
        for i, r in enumerate(runs)})
    log.info("mean rise time %.2f s; worst plateau error %.3f %%", summary["rise_time_mean"],
             summary["plateau_error_max_abs"])
    return folder


def load_control(cfg: RunConfig, out):
    """Records written by ``control`` for this config, in suite order."""
    rec_dir = Path(out) / "control" / "records"
    runs = suite_runs(cfg)
    chosen = [runs[0]] + runs[cfg.control.step_trials:]
    return [load_record(_require(rec_dir / f"{r.profile.label}.csv", "control"), r.profile, r.seed,
                        r.feedback) for r in chosen]


# -- report -----------------------------------------------------------------------

def cmd_report(cfg: RunConfig, out) -> Path:
    """Run any missing stage, then render figures and a combined summary."""
    out = Path(out)
    if not (out / "data" / "markers.csv").is_file():
        cmd_generate(cfg, out)
    if not (out / "model" / "model.json").is_file():
        cmd_train(cfg, out)
    if not (out / "evaluate" / "sensor_error.json").is_file():
        cmd_evaluate(cfg, out)
    if not (out / "control" / "summary.json").is_file():
        cmd_control(cfg, out)
    from .figures import render_all  # matplotlib only when figures are requested

    folder = stage_dir(out, "report")
    records = load_control(cfg, out)
    figures = render_all(out, folder, records, cfg)
    doc = {
        "sensor_error": json.loads((out / "evaluate" / "sensor_error.json").read_text()),
        "control": json.loads((out / "control" / "summary.json").read_text()),
        "training": json.loads((out / "model" / "manifest.json").read_text()),
        "figures": [p.name for p in figures],
    }
    doc["training"].pop("files", None)
    (folder / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_stage_manifest(folder, "report", cfg)
    log.info("report written to %s", folder)
    return folder
