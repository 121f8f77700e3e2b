"""Command-line driver: ``tmx gen | infer | validate | sweep | report``.

Usage and configuration errors exit with status 1; numerical failures exit with 2.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import DIRECTIONS, ExperimentConfig
from .datagen import (
    DatasetConfig,
    make_dataset,
    make_validation,
    sampling_ratio,
    shift_dataset,
    swap_io,
)
from .decimation import (
    CRITERIA,
    EmptyTransmissionError,
    OptimizationFailure,
    run_decimation,
)
from .metrics import (
    SingularMatrixError,
    correlation,
    extract_T,
    extract_noise,
    matrix_inverse,
    metrics_report,
    pseudo_unity,
    q_error,
    stochasticity,
    validate,
)
from .model import DegenerateModelError, InvalidNoiseError, TransmissionSpec
from .pseudolikelihood import ModelDomainError

log = logging.getLogger("tmx")

NUMERICAL_ERRORS = (OptimizationFailure, ModelDomainError, DegenerateModelError,
                    InvalidNoiseError, SingularMatrixError, EmptyTransmissionError,
                    FloatingPointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- config


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} not found")
        cfg = ExperimentConfig.from_dict(io.read_json(path))
    ds_over = {}
    for flag, key in (("w", "w"), ("s", "s"), ("m", "m_samples"), ("sigma", "sigma_noise"),
                      ("mu_in", "mu_in"), ("sigma_in", "sigma_in"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            ds_over[key] = value
    if getattr(args, "no_clip", False):
        ds_over["clip"] = False
    over = {}
    if ds_over:
        over["dataset"] = replace(cfg.dataset, **ds_over)
    for flag in ("variant", "direction", "fraction", "out", "threads", "val_seed"):
        value = getattr(args, flag, None)
        if value is not None:
            over[flag] = value
    if getattr(args, "half_width", None) is not None:
        over["half_width"] = args.half_width
    if getattr(args, "criteria", None):
        over["criteria"] = tuple(c.strip() for c in args.criteria.split(","))
    if getattr(args, "grid", None):
        over["noise_grid"] = tuple(float(x) for x in args.grid.split(","))
    if getattr(args, "m_val", None) is not None:
        over["m_validation"] = args.m_val
    if getattr(args, "max_iters", None) is not None:
        over["optimizer"] = replace(cfg.optimizer, max_iters=args.max_iters)
    return replace(cfg, **over) if over else cfg


def _dataset_meta(cfg: DatasetConfig) -> dict:
    d = dict(cfg.__dict__)
    d["sigma_noise"] = cfg.sigma_noise
    return d


# ---------------------------------------------------------------- gen


def write_generated(out: Path, cfg: ExperimentConfig):
    t, raw = make_dataset(cfg.dataset)
    io.write_dataset(out, raw, _dataset_meta(cfg.dataset))
    io.write_array(out / "transmission.csv", t.T)
    io.write_json(out / "transmission.json", {"w": t.w, "s": t.s, "sigma": t.sigma,
                                              "seed": t.seed, "n_active": t.n_active})
    io.write_json(out / "config.json", cfg.to_dict())
    return t, raw


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.out)
    t, raw = write_generated(out, cfg)
    xi = sampling_ratio(cfg.dataset.w, cfg.dataset.m_samples, cfg.dataset.s)
    print(f"wrote {len(raw)} samples (N={raw.n}, {t.n_active} active T entries, "
          f"sampling ratio {xi:.2f}) to {out}")
    return 0


def _load_truth(dataset_dir: Path):
    ds, meta = io.read_dataset(dataset_dir)
    known = set(DatasetConfig.__dataclass_fields__)
    dcfg = DatasetConfig(**{k: v for k, v in meta.items() if k in known})
    t_path = dataset_dir / "transmission.csv"
    truth = None
    if t_path.exists():
        truth = TransmissionSpec(w=dcfg.w, s=dcfg.s, T=io.read_array(t_path),
                                 sigma=dcfg.sigma_noise, seed=dcfg.seed)
    return ds, dcfg, truth


# ---------------------------------------------------------------- infer


def _directions(direction: str):
    return ("direct", "inverse") if direction == "both" else (direction,)


def infer_direction(ds, cfg: ExperimentConfig, direction: str, out: Path, resume: bool = True,
                    meta: dict | None = None):
    """Decimation run for one direction with per-step checkpoints under ``out``."""
    data = swap_io(ds) if direction == "inverse" else ds
    ckpt = out / "checkpoint"
    start = io.load_checkpoint(ckpt) if resume else None
    if start:
        log.info("%s: resuming after step %d", direction, len(start[0]) - 1)

    def on_step(records, models):
        io.save_checkpoint(ckpt, records, models)

    traj = run_decimation(data, cfg.decimation(), start=start, on_step=on_step)
    io.write_trajectory(out / "trajectory.csv", traj)
    summary = io.selected_summary(traj)
    summary_meta = {"direction": direction, "l_max": traj.l_max, "l_min": traj.l_min,
                    "M": traj.m_samples, "selected": summary}
    io.write_json(out / "summary.json", summary_meta)
    for name in cfg.criteria:
        step, model = traj.models[name]
        m_meta = dict(meta or {})
        m_meta.update(criterion=name, step=step, direction=direction, shifted=data.shifted)
        io.write_matrix(out / "models" / f"{name}.csv", model, m_meta)
    return traj


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    if not args.dataset:
        raise UsageError("infer needs --dataset DIR")
    dataset_dir = Path(args.dataset)
    if not (dataset_dir / "dataset.json").exists():
        raise UsageError(f"no dataset found in {dataset_dir}")
    raw, dcfg, _ = _load_truth(dataset_dir)
    cfg = replace(cfg, dataset=dcfg)
    ds = raw if raw.shifted else shift_dataset(raw)
    out = Path(cfg.out)
    run_cfg = cfg.to_dict()
    run_cfg["dataset_dir"] = str(dataset_dir)
    io.write_json(out / "config.json", run_cfg)
    meta = {"w": dcfg.w, "s": dcfg.s, "sigma": dcfg.sigma_noise, "seed": dcfg.seed}
    for direction in _directions(cfg.direction):
        traj = infer_direction(ds, cfg, direction, out / direction, resume=not args.no_resume,
                               meta=meta)
        sel = ", ".join(f"{c}: step {traj.selected_step(c)} (K={traj.records[traj.selected_step(c)].k_active})"
                        for c in cfg.criteria)
        print(f"{direction}: {len(traj.records)} steps; {sel}")
    return 0


# ---------------------------------------------------------------- validate


def _load_model_T(run: Path, direction: str, criterion: str):
    path = run / direction / "models" / f"{criterion}.csv"
    if not path.exists():
        return None, None
    m, _ = io.read_matrix(path)
    return m, extract_T(m)


def _safe(fn, *a):
    try:
        return fn(*a)
    except (SingularMatrixError, ValueError):
        return None


def reconstruct_image(image, t_true, t_inf, t_inv_inf, means, sigma_noise, clip, seed):
    """Send ``image`` through the true channel and reconstruct it with
    ``inv(t_inf)`` and with ``t_inv_inf``; ``None`` where unavailable."""
    h = t_true.shape[0]
    x = np.asarray(image, dtype=float).ravel()
    if x.size != h:
        raise UsageError(f"image has {x.size} pixels, the channel has {h}")
    y = t_true @ x
    if sigma_noise > 0:
        y = y + np.random.default_rng(np.random.SeedSequence([seed, 3])).normal(0, sigma_noise, h)
    if clip:
        y = np.clip(y, 0.0, 1.0)
    mu_in, mu_out = means[:h], means[h:]
    out = {}
    if t_inf is not None:
        inv = _safe(lambda a: matrix_inverse(a)[0], t_inf)
        out["inverted_direct"] = None if inv is None else mu_in + inv @ (y - mu_out)
    if t_inv_inf is not None:
        out["inverse"] = mu_in + t_inv_inf @ (y - mu_out)
    return out


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    run = Path(args.run)
    if not (run / "config.json").exists():
        raise UsageError(f"{run} is not a run directory (config.json missing)")
    run_cfg = io.read_json(run / "config.json")
    dataset_dir = Path(run_cfg.get("dataset_dir", ""))
    if not (dataset_dir / "dataset.json").exists():
        raise UsageError(f"dataset directory {dataset_dir} referenced by the run is missing")
    raw, dcfg, truth = _load_truth(dataset_dir)
    if truth is None:
        raise UsageError("validation needs the ground-truth transmission.csv next to the dataset")
    crit = args.criterion
    m_dir, t_inf = _load_model_T(run, "direct", crit)
    m_inv, t_inv_inf = _load_model_T(run, "inverse", crit)
    if t_inf is None and t_inv_inf is None:
        raise UsageError(f"no {crit} models found under {run}")
    val = make_validation(truth, dcfg, cfg.val_seed, cfg.m_validation)
    curves = validate(t_inf, t_inv_inf, truth.T, val, raw.channel_means)
    report = {"criterion": crit, "val_seed": cfg.val_seed, "M_validation": cfg.m_validation,
              "sigma_noise": dcfg.sigma_noise, "w": dcfg.w, "curves": curves.to_dict()}
    if m_dir is not None:
        report["direct"] = metrics_report(m_dir, truth.T, t_inv_inf).to_dict()
        mean, std = stochasticity(t_inf)
        report["direct"]["row_sum_mean"], report["direct"]["row_sum_std"] = mean, std
    if m_inv is not None:
        _, sig_inv, theta_inv = extract_noise(m_inv)
        inv_true = _safe(lambda a: matrix_inverse(a)[0], truth.T)
        mean, std = stochasticity(t_inv_inf)
        report["inverse"] = {"theta": theta_inv, "row_sum_mean": mean, "row_sum_std": std,
                             "q_error": None if inv_true is None else q_error(inv_true, t_inv_inf)}
    if t_inf is not None and t_inv_inf is not None:
        pu = pseudo_unity(t_inv_inf, t_inf)
        report["pseudo_unity"] = {"dominance_ab": pu.dominance_ab, "dominance_ba": pu.dominance_ba,
                                  "sorted_ab": pu.sorted_ab, "sorted_ba": pu.sorted_ba}
    if args.image:
        image = io.read_array(args.image)
        recon = reconstruct_image(image, truth.T, t_inf, t_inv_inf, raw.channel_means,
                                  dcfg.sigma_noise, dcfg.clip, cfg.val_seed)
        w = dcfg.w
        report["image"] = {}
        for name, rec in recon.items():
            if rec is None:
                report["image"][name] = None
                continue
            io.write_array(run / f"reconstruction_{name}.csv", rec.reshape(w, w))
            report["image"][name] = _safe(correlation, image.ravel(), rec)
    out = run / "report.json"
    io.write_json(out, report)
    for name, stat in curves.to_dict().items():
        mean = "n/a (singular)" if stat["mean"] is None else f"{stat['mean']:.4f}"
        print(f"{name:24s} C = {mean}")
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------- sweep


SWEEP_COLUMNS = ("sigma", "direction") + io.TRAJECTORY_COLUMNS
METRIC_COLUMNS = ("sigma", "direction", "criterion", "step", "K", "n_T_active", "Q", "theta",
                  "theta_th", "row_sum_mean", "row_sum_std")


def sweep_point(cfg: ExperimentConfig, sigma: float, out: str):
    """Generate and infer at one noise level; returns trajectory and metric rows."""
    point = replace(cfg, dataset=replace(cfg.dataset, sigma_noise=sigma))
    sub = Path(out) / f"sigma_{sigma:.4f}"
    t, raw = write_generated(sub / "data", point)
    ds = shift_dataset(raw)
    inv_true = _safe(lambda a: matrix_inverse(a)[0], t.T)
    rows, metric_rows = [], []
    for direction in _directions(cfg.direction):
        traj = infer_direction(ds, point, direction, sub / direction, resume=True)
        for r in io.trajectory_rows(traj):
            rows.append((io._fmt(sigma), direction) + tuple(r))
        truth = t.T if direction == "direct" else inv_true
        for name in cfg.criteria:
            step, m = traj.models[name]
            t_inf = extract_T(m)
            _, _, theta = extract_noise(m)
            mean, std = stochasticity(t_inf)
            q = q_error(truth, t_inf) if truth is not None else math.nan
            metric_rows.append((io._fmt(sigma), direction, name, step, traj.records[step].k_active,
                                traj.records[step].n_t_active, io._fmt(q), io._fmt(theta),
                                io._fmt(2 * sigma**2), io._fmt(mean), io._fmt(std)))
    return rows, metric_rows


def _sweep_worker(payload):
    cfg_dict, sigma, out = payload
    return sweep_point(ExperimentConfig.from_dict(cfg_dict), sigma, out)


def _write_csv(path: Path, header, rows):
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.out)
    io.write_json(out / "config.json", cfg.to_dict())
    payloads = [(cfg.to_dict(), float(s), str(out)) for s in cfg.noise_grid]
    if cfg.threads > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    else:
        results = [_sweep_worker(p) for p in payloads]
    rows = [r for res in results for r in res[0]]
    metric_rows = [r for res in results for r in res[1]]
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, metric_rows)
    print(f"{len(cfg.noise_grid)} noise levels, {len(rows)} trajectory rows -> {out / 'sweep.csv'}")
    return 0


# ---------------------------------------------------------------- report


def cmd_report(args) -> int:
    run = Path(args.run)
    if not (run / "config.json").exists():
        raise UsageError(f"{run} is not a run directory (config.json missing)")
    lines = []
    for direction in DIRECTIONS[:2]:
        path = run / direction / "summary.json"
        if not path.exists():
            continue
        summary = io.read_json(path)
        lines.append(f"[{direction}] L_max={summary['l_max']:.6f} L_min={summary['l_min']:.6f} "
                     f"M={summary['M']}")
        lines.append(f"  {'criterion':9s} {'step':>5s} {'K':>7s} {'T active':>9s} {'L':>12s}")
        for name, sel in summary["selected"].items():
            lines.append(f"  {name:9s} {sel['step']:5d} {sel['K']:7d} {sel['n_T_active']:9d} "
                         f"{sel['L']:12.6f}")
    report = run / "report.json"
    if report.exists():
        rep = io.read_json(report)
        lines.append(f"[validation] criterion {rep['criterion']}, M'={rep['M_validation']}")
        for name, stat in rep["curves"].items():
            mean = "n/a" if stat["mean"] is None else f"{stat['mean']:.4f}"
            lines.append(f"  {name:24s} C = {mean}")
    if not lines:
        raise UsageError(f"nothing to report in {run}")
    text = "\n".join(lines) + "\n"
    (run / "report.txt").write_text(text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = _Parser(add_help=False)
    data.add_argument("--w", type=int, help="linear size; N = 2 w^2")
    data.add_argument("--s", type=float, help="fraction of active T entries")
    data.add_argument("--m", type=int, help="number of samples")
    data.add_argument("--sigma", type=float, help="output noise standard deviation")
    data.add_argument("--mu-in", dest="mu_in", type=float)
    data.add_argument("--sigma-in", dest="sigma_in", type=float)
    data.add_argument("--no-clip", dest="no_clip", action="store_true")

    inference = _Parser(add_help=False)
    inference.add_argument("--variant", help="InfInf, ZeroInf, ZeroOne, SymUnit or SymHalf")
    inference.add_argument("--half-width", dest="half_width", type=float)
    inference.add_argument("--direction", choices=DIRECTIONS)
    inference.add_argument("--fraction", type=float, help="T entries removed per step / w^4")
    inference.add_argument("--criteria", help="comma-separated subset of " + ",".join(CRITERIA))
    inference.add_argument("--max-iters", dest="max_iters", type=int)

    p = _Parser(prog="tmx", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", parents=[common, data], help="generate a synthetic dataset")
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("infer", parents=[common, inference], help="decimation run on a dataset")
    i.add_argument("--dataset", help="directory written by tmx gen")
    i.add_argument("--no-resume", dest="no_resume", action="store_true",
                   help="ignore existing checkpoints")
    i.set_defaults(func=cmd_infer)

    v = sub.add_parser("validate", parents=[common], help="metrics on a fresh validation set")
    v.add_argument("--run", required=True, help="directory written by tmx infer")
    v.add_argument("--val-seed", dest="val_seed", type=int)
    v.add_argument("--m-val", dest="m_val", type=int)
    v.add_argument("--criterion", default="AIC", choices=CRITERIA)
    v.add_argument("--image", help="CSV of a w x w image to reconstruct")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("sweep", parents=[common, data, inference], help="noise sweep")
    s.add_argument("--grid", help="comma-separated noise levels")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", parents=[common], help="summarise a run directory")
    r.add_argument("--run", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"tmx: error: {exc}", file=sys.stderr)
        return 1
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"tmx: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"tmx: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
