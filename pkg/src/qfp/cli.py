"""Command-line orchestration of the fingerprint pipeline.

Subcommands: gen-h2, fingerprint, train, sweep, cluster,
optimize-measurement.  All outputs land under --out with fixed filenames;
every run writes a provenance.json sufficient to reproduce it.  Exit codes:
0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from qfp import chem_io, fingerprint_ml, pipeline
from qfp.pipeline import ConfigError, DataError, NumericalError, PipelineConfig

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("qfp")
except Exception:  # pragma: no cover - metadata missing in odd installs
    VERSION = "unknown"


def _load_config(path: str) -> PipelineConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return PipelineConfig.from_dict(raw)


def _write_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _provenance(out_dir: str, command: str, args: dict, config: dict | None):
    _write_json(
        {"command": command, "args": args, "config": config, "version": VERSION},
        os.path.join(out_dir, "provenance.json"),
    )


def _read_targets(path: str) -> dict:
    if not os.path.exists(path):
        raise DataError(f"targets file not found: {path}")
    targets = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header != ["molecule_id", "target"]:
            raise DataError(f"{path}: expected header `molecule_id,target`")
        for ln, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{ln}: expected two columns")
            try:
                targets[parts[0]] = float(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{ln}: bad target {parts[1]!r}") from exc
    return targets


def _align_targets(ids, targets: dict) -> np.ndarray:
    missing = [i for i in ids if i not in targets]
    extra = sorted(set(targets) - set(ids))
    if missing or extra:
        raise DataError(
            "feature/target id mismatch; "
            f"missing targets: {missing}; unmatched targets: {extra}"
        )
    return np.array([targets[i] for i in ids])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_h2(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    ids = pipeline.generate_h2_dataset(args.rmin, args.rmax, args.count, args.out)
    _provenance(args.out, "gen-h2",
                {"rmin": args.rmin, "rmax": args.rmax, "count": args.count}, None)
    print(f"wrote {len(ids)} molecules to {args.out}")
    return 0


def cmd_fingerprint(args) -> int:
    cfg = _load_config(args.config)
    if cfg.observable["kind"] == "rdm":
        raise ConfigError(
            "fingerprint command needs a scalar observable (F or O); "
            "rdm trajectories are a library-level feature")
    os.makedirs(args.out, exist_ok=True)
    base = os.path.dirname(os.path.abspath(args.config))
    ids, _, grid, values = pipeline.run_fingerprints(cfg, base, args.workers)
    chem_io.save_features(ids, grid, values,
                          os.path.join(args.out, "features.csv"))
    _provenance(args.out, "fingerprint", {"workers": args.workers}, cfg.to_dict())
    print(f"wrote {len(ids)}x{values.shape[1] if len(ids) else 0} feature table")
    return 0


def _model_spec_from_args(args) -> dict:
    if args.model == "pls":
        return {"kind": "pls", "n_components": args.components}
    return {"kind": "krr", "length_scale": args.length_scale, "ridge": args.ridge}


def cmd_train(args) -> int:
    ids, grid, X = chem_io.load_features(args.features)
    y = _align_targets(ids, _read_targets(args.targets))
    spec = _model_spec_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    try:
        report = fingerprint_ml.kfold_cv(X, y, spec, k=args.folds,
                                         seed=args.seed, ids=ids)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    _write_json(report.to_json_dict(), os.path.join(args.out, "cv_report.json"))
    pred = {i: p for _, va, preds in report.folds for i, p in zip(va, preds)}
    with open(os.path.join(args.out, "predictions.csv"), "w") as fh:
        fh.write("molecule_id,actual,predicted\n")
        for i, yi in zip(ids, y):
            fh.write(f"{i},{yi:.17g},{pred[i]:.17g}\n")
    _provenance(args.out, "train",
                {"features": os.path.basename(args.features),
                 "targets": os.path.basename(args.targets),
                 "model": spec, "folds": args.folds, "seed": args.seed}, None)
    print(f"cv R2={report.r2:.4f} rmse={report.rmse:.4g}")
    return 0


def _sweep_config(cfg: PipelineConfig, axis: str, value: str) -> PipelineConfig:
    raw = cfg.to_dict()
    if axis == "time_max":
        raw["time_grid"] = dict(raw["time_grid"], stop=float(value))
    elif axis == "trotter_r":
        if raw["evolver"]["kind"] != "trotter":
            raise ConfigError("--axis trotter_r requires a trotter evolver")
        raw["evolver"] = dict(raw["evolver"], r=int(value))
    elif axis == "initial_state":
        raw["initial_state"] = value
    elif axis == "active_space":
        try:
            ne, no = (int(v) for v in value.split(":"))
        except ValueError as exc:
            raise ConfigError(
                f"--axis active_space values look like `n_elec:n_orb`, got {value!r}"
            ) from exc
        if raw["embedding"]["mode"] != "active_space":
            raise ConfigError("--axis active_space requires active_space embedding")
        raw["embedding"] = dict(raw["embedding"],
                                n_active_electrons=ne, n_active_orbitals=no)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return PipelineConfig.from_dict(raw)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    base = os.path.dirname(os.path.abspath(args.config))
    rows, errors = [], {}
    for value in args.values:
        try:
            sub = _sweep_config(cfg, args.axis, value)
            ids, y, grid, X = pipeline.run_fingerprints(sub, base, args.workers)
            if not np.all(np.isfinite(y)):
                raise DataError("dataset is missing finite targets")
            report = fingerprint_ml.kfold_cv(
                X, y, sub.model, k=sub.cv["k"], seed=sub.cv.get("seed", 0), ids=ids)
            _write_json(report.to_json_dict(),
                        os.path.join(args.out, f"cv_report_{args.axis}_{value}.json"))
            rows.append((value, report.r2, report.rmse))
        except ConfigError:
            raise
        except (DataError, NumericalError, ValueError) as exc:
            errors[value] = str(exc)
            rows.append((value, float("nan"), float("nan")))
    with open(os.path.join(args.out, "summary.csv"), "w") as fh:
        fh.write(f"{args.axis},r2,rmse\n")
        for value, r2, rmse in rows:
            fh.write(f"{value},{r2:.17g},{rmse:.17g}\n")
    _provenance(args.out, "sweep",
                {"axis": args.axis, "values": list(args.values),
                 "workers": args.workers, "errors": errors}, cfg.to_dict())
    print(f"swept {args.axis} over {len(args.values)} values "
          f"({len(errors)} failed)")
    return 0


def cmd_cluster(args) -> int:
    ids, grid, X = chem_io.load_features(args.features)
    if len(ids) == 0:
        raise DataError(f"{args.features}: empty feature table")
    os.makedirs(args.out, exist_ok=True)
    try:
        feats = fingerprint_ml.ts_feature_matrix(X, grid)
        scores = fingerprint_ml.pca_project(feats, args.pca_dims)
        labels, inertia = fingerprint_ml.kmeans_cluster(scores, args.k, seed=args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    with open(os.path.join(args.out, "labels.csv"), "w") as fh:
        fh.write("molecule_id,cluster\n")
        for i, lab in zip(ids, labels):
            fh.write(f"{i},{lab}\n")
    with open(os.path.join(args.out, "cluster_means.csv"), "w") as fh:
        fh.write("cluster," + ",".join(f"t={t:.17g}" for t in grid) + "\n")
        for j in range(args.k):
            mean = X[labels == j].mean(axis=0) if np.any(labels == j) else 0 * grid
            fh.write(f"{j}," + ",".join(f"{v:.17g}" for v in mean) + "\n")
    _provenance(args.out, "cluster",
                {"features": os.path.basename(args.features), "k": args.k,
                 "pca_dims": args.pca_dims, "seed": args.seed,
                 "inertia": inertia}, None)
    print(f"clustered {len(ids)} molecules into {args.k} groups")
    return 0


def cmd_optimize_measurement(args) -> int:
    cfg = _load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    base = os.path.dirname(os.path.abspath(args.config))
    if cfg.model["kind"] != "krr":
        raise ConfigError("optimize-measurement requires a krr model spec")
    manifest = pipeline.load_dataset(cfg, base)
    y = np.array([e.target for e in manifest.entries])
    if len(y) < 5 or not np.all(np.isfinite(y)):
        raise DataError("measurement optimization needs >= 5 molecules with targets")
    grid = cfg.grid()
    trajs = []
    n_orb = None
    for e in manifest.entries:
        m = pipeline.build_molecule(e)
        eh = pipeline.embed_molecule(m, cfg.embedding)
        n_orb = eh.n_active_orbitals
        trajs.append(fingerprint_ml.rdm_trajectory(
            eh, cfg.initial_state, grid, evolver=cfg.evolver))
    trajs = np.real(np.array(trajs))
    tr, va, _ = fingerprint_ml.train_val_test_split(len(y), seed=args.seed)
    iu = np.triu_indices(n_orb)

    def objective(vec):
        O = np.zeros((n_orb, n_orb))
        O[iu] = vec
        O = O + np.triu(O, k=1).T
        X = fingerprint_ml.one_body_features(trajs, O)
        model = fingerprint_ml.krr_fit(
            X[tr], y[tr],
            length_scale=cfg.model.get("length_scale", 1.0),
            ridge=cfg.model.get("ridge", 1e-6))
        pred = fingerprint_ml.krr_predict(model, X[va])
        return float(np.mean((pred - y[va]) ** 2))

    bounds = [(-1.0, 1.0)] * len(iu[0])
    state = fingerprint_ml.gp_optimize(objective, bounds, budget=args.budget,
                                       seed=args.seed)
    O_best = np.zeros((n_orb, n_orb))
    O_best[iu] = state.best_point
    O_best = O_best + np.triu(O_best, k=1).T
    _write_json(
        {"points": state.points.tolist(), "values": state.values.tolist(),
         "length_scale": state.length_scale,
         "signal_variance": state.signal_variance,
         "noise_variance": state.noise_variance,
         "best_point": state.best_point.tolist(),
         "best_value": state.best_value},
        os.path.join(args.out, "gp_history.json"))
    _write_json({"operator": O_best.tolist(), "validation_mse": state.best_value},
                os.path.join(args.out, "best_operator.json"))
    _provenance(args.out, "optimize-measurement",
                {"budget": args.budget, "seed": args.seed}, cfg.to_dict())
    print(f"best validation MSE {state.best_value:.4g}")
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfp",
                                description="quantum fingerprint pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-h2", help="generate an H2 separation-scan dataset")
    g.add_argument("--rmin", type=float, required=True)
    g.add_argument("--rmax", type=float, required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_h2)

    f = sub.add_parser("fingerprint", help="compute fingerprint features")
    f.add_argument("--config", required=True)
    f.add_argument("--workers", type=int, default=None)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fingerprint)

    t = sub.add_parser("train", help="cross-validated model fit")
    t.add_argument("--features", required=True)
    t.add_argument("--targets", required=True)
    t.add_argument("--model", choices=("pls", "krr"), required=True)
    t.add_argument("--components", type=int, default=2)
    t.add_argument("--length-scale", type=float, default=1.0)
    t.add_argument("--ridge", type=float, default=1e-6)
    t.add_argument("--folds", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="sweep one config axis")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True,
                   choices=("time_max", "active_space", "trotter_r", "initial_state"))
    s.add_argument("--values", nargs="+", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("cluster", help="PCA + k-means on fingerprint features")
    c.add_argument("--features", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--pca-dims", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    o = sub.add_parser("optimize-measurement",
                       help="GP search for the best one-body measurement")
    o.add_argument("--config", required=True)
    o.add_argument("--budget", type=int, default=60)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_optimize_measurement)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
