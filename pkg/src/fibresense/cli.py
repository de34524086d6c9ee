"""Command-line entry point: ``fibresense {sweep,simulate,train,eval,identify}``.

Every subcommand reads a manifest (``--config``), writes CSV/YAML/JSON into
``--out`` atomically and echoes the fully resolved manifest as
``manifest.yaml`` so that ``--config <out>/manifest.yaml`` reproduces the run.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import load_run_config
from .identifiability import identify
from .io import ConfigError, atomic_write_text, write_csv, write_yaml
from .ladder import frequency_sweep
from .reconstruction.lsq import NonFiniteResidual
from .reconstruction.metrics import evaluate_columns
from .reconstruction.mlp import MLPModel, TrainingDiverged

log = logging.getLogger("fibresense")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _echo(cfg, out):
    write_yaml(out / "manifest.yaml", cfg.to_manifest())


def _require_protocol(cfg):
    if cfg.protocol is None:
        raise ConfigError("this subcommand needs a 'protocol' section")


def build_dataset(cfg):
    rate = cfg.excitation.frame_rate
    if cfg.kind == "joint":
        profile, angles = harness.joint_protocol(cfg.protocol, rate, cfg.model.n)
    else:
        if cfg.model.n < 1 + max(max(c) for c in cfg.protocol.combos):
            raise ConfigError("staircase combos reference segments the model does not have")
        profile, angles = harness.staircase_protocol(cfg.protocol, rate, cfg.model.n), None
    return harness.synthesize_dataset(cfg.model, cfg.excitation, cfg.noise, profile, angles,
                                      method=cfg.method)


def cmd_sweep(cfg, out, args):
    grid = cfg.sweep.grid()
    header = ["freq_hz", "re_ohm", "im_ohm", "cp_farad"]
    rest = frequency_sweep(cfg.model, None, grid).cp
    names, deltas = [], []
    for case in cfg.sweep.resolved_cases(cfg.model):
        sw = frequency_sweep(cfg.model, case["strains"], grid)
        rows = [[f, z.real, z.imag, cp] for f, z, cp in sw.rows()]
        write_csv(out / f"sweep_{case['name']}.csv", header, rows)
        names.append(case["name"])
        deltas.append(sw.cp - rest)
    write_csv(out / "sweep_delta_cp.csv", ["freq_hz", *names],
              [[f, *row] for f, row in zip(grid, np.array(deltas).T)])
    write_csv(out / "fig4_delta_cp.csv", ["freq_hz", "segment", "strain", "delta_cp_farad"],
              harness.fig4_rows(cfg.model, grid, cfg.sweep.levels))
    log.info("wrote %d sweep cases to %s", len(names), out)


def cmd_simulate(cfg, out, args):
    _require_protocol(cfg)
    ds = build_dataset(cfg)
    write_csv(out / "frames.csv", ds.frame_header(), ds.frame_rows())
    write_csv(out / "targets.csv", ds.target_header(), ds.target_rows())
    write_yaml(out / "dataset.yaml", {
        "kind": ds.kind, "frames": len(ds), "frame_rate": ds.rate,
        "trials": sorted(int(t) for t in np.unique(ds.trial)),
        "dropped_samples": int(ds.frames.dropped), "clipped_samples": int(ds.frames.clipped),
    })
    log.info("simulated %d frames (%s) into %s", len(ds), ds.kind, out)


def _write_strain_outputs(out, ds, report, prefix=""):
    write_csv(out / f"{prefix}metrics.csv", harness.METRICS_HEADER, harness.metrics_rows(report.metrics))
    names = ds.target_names
    header = ["t_s", *(f"ref_{n}" for n in names), *(f"pred_{n}" for n in names)]
    cols = [report.test_t[:, None], report.test_ref, report.test_pred]
    write_csv(out / f"{prefix}fig6_strain.csv", header, np.hstack(cols).tolist())
    if report.lsq_pred is not None:
        header = ["t_s", *(f"ref_{n}" for n in names), *(f"lsq_{n}" for n in names)]
        cols = [report.lsq_t[:, None], report.lsq_ref, report.lsq_pred]
        write_csv(out / f"{prefix}fig6_lsq.csv", header, np.hstack(cols).tolist())
        write_csv(out / f"{prefix}lsq_metrics.csv", harness.METRICS_HEADER,
                  harness.metrics_rows(report.lsq_metrics))


def _write_joint_outputs(out, report, prefix=""):
    write_csv(out / f"{prefix}metrics.csv", harness.METRICS_HEADER, harness.metrics_rows(report.metrics))
    rows = []
    for f in report.folds:
        for name, m in f.metrics.items():
            rows.append([f.test_trial, name, m.rmse, m.nrmse, m.r2, f.spearman.get(name, float("nan"))])
    write_csv(out / f"{prefix}fold_metrics.csv", ["trial", "target", "rmse", "nrmse", "r2", "spearman"], rows)
    write_csv(out / f"{prefix}spearman.csv", ["target", "spearman_moving", "spearman_all"],
              [[j, report.spearman[j], report.spearman_all[j]] for j in harness.JOINTS])
    header = ["t_s", "trial", *(f"ref_{j}" for j in harness.JOINTS), *(f"pred_{j}" for j in harness.JOINTS)]
    rows = []
    for f in report.folds:
        for t, r, p in zip(f.t, f.ref, f.pred):
            rows.append([t, f.test_trial, *r, *p])
    write_csv(out / f"{prefix}fig7_joint.csv", header, rows)


def cmd_train(cfg, out, args):
    _require_protocol(cfg)
    ds = build_dataset(cfg)
    if cfg.kind == "strain":
        param = cfg.lsq["param"]
        if param == "auto":
            param = "rc" if cfg.noise.is_clean else "strain"
        report = harness.run_strain_validation(
            ds, cfg.train, cfg.arch, ladder=cfg.model, exc_cfg=cfg.excitation,
            lsq_param=None if param == "none" else param, lsq_stride=cfg.lsq["stride"],
        )
        report.model.save(out / "model.json")
        _write_strain_outputs(out, ds, report)
        write_csv(out / "history.csv", ["epoch", "train_loss", "val_score"],
                  [[k, a, b] for k, (a, b) in enumerate(zip(report.history.train_loss,
                                                           report.history.val_score))])
        agg = report.metrics["aggregate"]
        log.info("test RMSE %.4f %% strain, R2 %.5f", agg.rmse, agg.r2)
        if report.lsq_metrics:
            log.info("LSQ (%s) RMSE %.4f %% strain, %d unconverged", param,
                     report.lsq_metrics["aggregate"].rmse, report.lsq_failures)
    else:
        report = harness.run_joint_scenario(ds, cfg.train, cfg.arch, ranges=cfg.protocol.ranges)
        for f in report.folds:
            f.model.save(out / "models" / f"fold_{f.test_trial:02d}.json")
        _write_joint_outputs(out, report)
        log.info("pooled RMSE (deg): %s", ", ".join(
            f"{j} {report.metrics[j].rmse:.2f}" for j in harness.JOINTS))


def _load_model(path):
    try:
        return MLPModel.load(path)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {path}") from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from exc


def cmd_eval(cfg, out, args):
    _require_protocol(cfg)
    src = Path(args.model) if args.model else out
    ds = build_dataset(cfg)
    if cfg.kind == "strain":
        path = src / "model.json" if src.is_dir() else src
        model = _load_model(path)
        test = (6,)
        sel, raw, pred = harness.strain_predictions(model, ds, test)
        ref = ds.targets[sel] * 100
        report = harness.StrainReport(
            metrics=evaluate_columns(pred, ref, ds.target_names),
            raw_metrics={}, lsq_metrics={}, model=model, history=None,
            test_t=ds.frames.t[sel], test_pred=pred, test_ref=ref,
        )
        _write_strain_outputs(out, ds, report, prefix="eval_")
    else:
        x, y = harness.prepare_joint_inputs(ds)
        folds = []
        for trial in sorted(int(t) for t in np.unique(ds.trial)):
            model = _load_model(src / "models" / f"fold_{trial:02d}.json")
            folds.append(harness.score_fold(model, x, y, ds, trial, cfg.protocol.ranges))
        _write_joint_outputs(out, harness.summarize_folds(folds, cfg.protocol.ranges), prefix="eval_")
    log.info("evaluation written to %s", out)


def cmd_identify(cfg, out, args):
    tol = args.tol if args.tol is not None else cfg.tol
    jac, res = identify(cfg.model, cfg.excitation.tones, tol=tol)
    lines = [res.summary(), f"tolerance {res.tol:.3g} (relative), condition number {res.condition_number:.3e}",
             "singular values:"]
    lines += [f"  {s:.6e}" for s in res.singular_values]
    text = "\n".join(lines) + "\n"
    atomic_write_text(out / "identify.txt", text)
    write_csv(out / "jacobian.csv", ["row", *jac.column_names],
              [[name, *row] for name, row in zip(jac.row_names, jac.values)])
    write_csv(out / "singular_values.csv", ["index", "sigma"], list(enumerate(res.singular_values)))
    if not args.quiet:
        sys.stdout.write(text)


COMMANDS = {"sweep": cmd_sweep, "simulate": cmd_simulate, "train": cmd_train,
            "eval": cmd_eval, "identify": cmd_identify}


def build_parser():
    p = argparse.ArgumentParser(prog="fibresense", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run manifest (YAML)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override every seed in the manifest")
        sp.add_argument("--quiet", action="store_true")
        if name == "eval":
            sp.add_argument("--model", default=None,
                            help="model file or training output directory (default: --out)")
        if name == "identify":
            sp.add_argument("--tol", type=float, default=None,
                            help="relative singular-value tolerance")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = load_run_config(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args)
        _echo(cfg, out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (TrainingDiverged, NonFiniteResidual, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
