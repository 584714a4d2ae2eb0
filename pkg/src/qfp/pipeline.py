"""Configuration and orchestration shared by the command-line tools.

Configs are plain JSON with exhaustive validation: every key is checked
against a schema and unknown keys are rejected, since silent typos are the
dominant failure mode in pipeline files.  The orchestration layer maps
module-level exceptions onto three coarse classes (config, data, numerical)
that the CLI translates into exit codes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from qfp import chem_io, embedding, fingerprint_ml, mean_field, quantum_sim
from qfp.chem_io import DatasetManifest, ManifestEntry, MolecularIntegrals

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "PipelineConfig",
    "worker_count",
    "build_molecule",
    "embed_molecule",
    "run_fingerprints",
    "generate_h2_dataset",
]

INITIAL_KINDS = ("hf_ground", "homo_lumo_excited", "half_occupied")


class ConfigError(ValueError):
    """Invalid pipeline configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Invalid or inconsistent input data (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """Numerical failure inside the pipeline (CLI exit code 4)."""


def _check_keys(d: dict, where: str, required: tuple, optional: tuple = ()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _number(d, key, where, lo=None, hi=None):
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}.{key}: {v} below minimum {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"{where}.{key}: {v} above maximum {hi}")
    return float(v)


def _integer(d, key, where, lo=None):
    v = d[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}.{key}: {v} below minimum {lo}")
    return v


def _validate_dataset(d):
    _check_keys(d, "dataset", ("kind",), ("path", "rmin", "rmax", "count"))
    kind = d["kind"]
    if kind == "manifest":
        _check_keys(d, "dataset", ("kind", "path"))
        if not isinstance(d["path"], str):
            raise ConfigError("dataset.path: expected a string")
    elif kind == "h2":
        _check_keys(d, "dataset", ("kind", "rmin", "rmax", "count"))
        rmin = _number(d, "rmin", "dataset", lo=0.2)
        rmax = _number(d, "rmax", "dataset")
        if rmax <= rmin:
            raise ConfigError("dataset: rmax must exceed rmin")
        _integer(d, "count", "dataset", lo=2)
    else:
        raise ConfigError(f"dataset.kind: unknown kind {kind!r}")
    return dict(d)


def _validate_embedding(d):
    _check_keys(d, "embedding", ("mode",),
                ("n_active_electrons", "n_active_orbitals", "fragment",
                 "fit_mu", "target_filling", "exchange_factor"))
    mode = d["mode"]
    xf = d.get("exchange_factor", 0.5)
    if xf not in (0.5, 1, 1.0):
        raise ConfigError("embedding.exchange_factor: must be 0.5 or 1.0")
    if mode == "active_space":
        _check_keys(d, "embedding", ("mode", "n_active_electrons", "n_active_orbitals"),
                    ("exchange_factor",))
        ne = _integer(d, "n_active_electrons", "embedding", lo=2)
        no = _integer(d, "n_active_orbitals", "embedding", lo=1)
        if ne % 2:
            raise ConfigError("embedding.n_active_electrons: must be even")
        if ne > 2 * no:
            raise ConfigError("embedding: more electrons than spin orbitals")
    elif mode == "dmet":
        _check_keys(d, "embedding", ("mode", "fragment"),
                    ("fit_mu", "target_filling", "exchange_factor"))
        frag = d["fragment"]
        if (not isinstance(frag, list) or not frag
                or not all(isinstance(i, int) and i >= 0 for i in frag)):
            raise ConfigError("embedding.fragment: expected a list of orbital indices")
        if len(set(frag)) != len(frag):
            raise ConfigError("embedding.fragment: duplicate indices")
        if not isinstance(d.get("fit_mu", False), bool):
            raise ConfigError("embedding.fit_mu: expected a boolean")
        tf = d.get("target_filling")
        if tf is not None and (not isinstance(tf, (int, float)) or isinstance(tf, bool)):
            raise ConfigError("embedding.target_filling: expected a number or null")
    else:
        raise ConfigError(f"embedding.mode: unknown mode {mode!r}")
    return dict(d)


def _validate_time_grid(d):
    _check_keys(d, "time_grid", ("start", "stop", "step"))
    start = _number(d, "start", "time_grid", lo=0.0)
    stop = _number(d, "stop", "time_grid")
    step = _number(d, "step", "time_grid")
    if step <= 0:
        raise ConfigError("time_grid.step: must be positive")
    if stop < start:
        raise ConfigError("time_grid: stop must be >= start")
    return dict(d)


def _validate_evolver(d):
    _check_keys(d, "evolver", ("kind",), ("order", "r"))
    if d["kind"] == "exact":
        _check_keys(d, "evolver", ("kind",))
    elif d["kind"] == "trotter":
        _check_keys(d, "evolver", ("kind",), ("order", "r"))
        if _integer({"order": d.get("order", 2)}, "order", "evolver") not in (1, 2):
            raise ConfigError("evolver.order: must be 1 or 2")
        _integer({"r": d.get("r", 1)}, "r", "evolver", lo=1)
    else:
        raise ConfigError(f"evolver.kind: unknown kind {d['kind']!r}")
    return dict(d)


def _validate_observable(d):
    _check_keys(d, "observable", ("kind",), ("matrix",))
    kind = d["kind"]
    if kind in ("F", "rdm"):
        _check_keys(d, "observable", ("kind",))
    elif kind == "O":
        _check_keys(d, "observable", ("kind", "matrix"))
        try:
            O = np.asarray(d["matrix"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"observable.matrix: not numeric: {exc}") from exc
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise ConfigError("observable.matrix: expected a square matrix")
        if not np.allclose(O, O.T):
            raise ConfigError("observable.matrix: must be symmetric")
    else:
        raise ConfigError(f"observable.kind: unknown kind {kind!r}")
    return dict(d)


def _validate_model(d):
    _check_keys(d, "model", ("kind",), ("n_components", "length_scale", "ridge"))
    if d["kind"] == "pls":
        _check_keys(d, "model", ("kind", "n_components"))
        _integer(d, "n_components", "model", lo=1)
    elif d["kind"] == "krr":
        _check_keys(d, "model", ("kind",), ("length_scale", "ridge"))
        if "length_scale" in d:
            _number(d, "length_scale", "model", lo=1e-12)
        if "ridge" in d:
            _number(d, "ridge", "model", lo=0.0)
    else:
        raise ConfigError(f"model.kind: unknown kind {d['kind']!r}")
    return dict(d)


def _validate_cv(d):
    _check_keys(d, "cv", ("k",), ("seed",))
    _integer(d, "k", "cv", lo=2)
    if "seed" in d:
        _integer(d, "seed", "cv", lo=0)
    return dict(d)


def _validate_noise(d):
    if d is None:
        return None
    _check_keys(d, "noise", ("p",), ("scale", "n_trajectories", "seed"))
    _number(d, "p", "noise", lo=0.0, hi=0.999)
    if "scale" in d:
        v = d["scale"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1 or v % 2 == 0:
            raise ConfigError("noise.scale: must be an odd integer >= 1")
    if "n_trajectories" in d:
        _integer(d, "n_trajectories", "noise", lo=1)
    if "seed" in d:
        _integer(d, "seed", "noise", lo=0)
    return dict(d)


@dataclass
class PipelineConfig:
    """Validated pipeline configuration; round-trips through to_dict."""

    dataset: dict
    embedding: dict
    initial_state: str
    time_grid: dict
    evolver: dict = field(default_factory=lambda: {"kind": "exact"})
    observable: dict = field(default_factory=lambda: {"kind": "F"})
    model: dict = field(default_factory=lambda: {"kind": "pls", "n_components": 2})
    cv: dict = field(default_factory=lambda: {"k": 5, "seed": 0})
    noise: dict | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        _check_keys(raw, "config",
                    ("dataset", "embedding", "initial_state", "time_grid"),
                    ("evolver", "observable", "model", "cv", "noise"))
        if raw["initial_state"] not in INITIAL_KINDS:
            raise ConfigError(
                f"initial_state: {raw['initial_state']!r} not one of {INITIAL_KINDS}"
            )
        cfg = cls(
            dataset=_validate_dataset(raw["dataset"]),
            embedding=_validate_embedding(raw["embedding"]),
            initial_state=raw["initial_state"],
            time_grid=_validate_time_grid(raw["time_grid"]),
        )
        if "evolver" in raw:
            cfg.evolver = _validate_evolver(raw["evolver"])
        if "observable" in raw:
            cfg.observable = _validate_observable(raw["observable"])
        if "model" in raw:
            cfg.model = _validate_model(raw["model"])
        if "cv" in raw:
            cfg.cv = _validate_cv(raw["cv"])
        if "noise" in raw:
            cfg.noise = _validate_noise(raw["noise"])
        if cfg.noise is not None and cfg.observable["kind"] == "rdm":
            raise ConfigError("noise: rdm features require noiseless evolution")
        if cfg.noise is not None and cfg.evolver["kind"] != "trotter":
            raise ConfigError("noise: requires a trotter evolver (gate-level noise)")
        return cfg

    def to_dict(self) -> dict:
        out = {
            "dataset": self.dataset,
            "embedding": self.embedding,
            "initial_state": self.initial_state,
            "time_grid": self.time_grid,
            "evolver": self.evolver,
            "observable": self.observable,
            "model": self.model,
            "cv": self.cv,
        }
        if self.noise is not None:
            out["noise"] = self.noise
        return out

    def grid(self) -> np.ndarray:
        g = self.time_grid
        n = int(round((g["stop"] - g["start"]) / g["step"])) + 1
        return g["start"] + g["step"] * np.arange(n)


def worker_count(flag_value: int | None = None) -> int:
    """Worker-pool size: explicit flag, then QFP_THREADS, then cpu count."""
    if flag_value is not None:
        if flag_value < 1:
            raise ConfigError("--workers: must be >= 1")
        return flag_value
    env = os.environ.get("QFP_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"QFP_THREADS: not an integer: {env!r}") from exc
        if n < 1:
            raise ConfigError("QFP_THREADS: must be >= 1")
        return n
    return os.cpu_count() or 1


def build_molecule(entry: ManifestEntry) -> MolecularIntegrals:
    """Integrals for a manifest entry (FCIDUMP file or geometry generator)."""
    if "fcidump" in entry.source:
        try:
            with open(entry.source["fcidump"]) as fh:
                return chem_io.parse_fcidump(fh.read())
        except FileNotFoundError as exc:
            raise DataError(f"molecule {entry.molecule_id!r}: {exc}") from exc
        except chem_io.FcidumpError as exc:
            raise DataError(f"molecule {entry.molecule_id!r}: {exc}") from exc
    gen = dict(entry.source["generator"])
    kind = gen.pop("kind", None)
    if kind == "h2":
        if set(gen) != {"separation"}:
            raise DataError(
                f"molecule {entry.molecule_id!r}: h2 generator takes `separation`"
            )
        return chem_io.s_orbital_integrals(chem_io.h2_geometry(float(gen["separation"])))
    if kind == "chain":
        if set(gen) != {"z_positions"}:
            raise DataError(
                f"molecule {entry.molecule_id!r}: chain generator takes `z_positions`"
            )
        return chem_io.s_orbital_integrals(
            chem_io.hydrogen_chain([float(z) for z in gen["z_positions"]])
        )
    raise DataError(f"molecule {entry.molecule_id!r}: unknown generator kind {kind!r}")


def embed_molecule(m: MolecularIntegrals, emb: dict) -> embedding.EmbeddedHamiltonian:
    """Mean field + the configured embedding for one molecule."""
    xf = float(emb.get("exchange_factor", 0.5))
    try:
        mf = mean_field.scf_solve(m)
        if not mf.converged:
            raise NumericalError("SCF did not converge")
        if emb["mode"] == "active_space":
            return embedding.homo_lumo_active_space(
                m, mf, emb["n_active_electrons"], emb["n_active_orbitals"],
                exchange_factor=xf,
            )
        X = mean_field.lowdin_orthonormalize(m.S)
        m_loc = embedding.localize_integrals(m, X)
        S_half = np.linalg.inv(X)
        D_loc = S_half @ mf.D @ S_half
        cb = embedding.dmet_cluster_basis(D_loc, embedding.FragmentSpec(emb["fragment"]))
        mu = 0.0
        if emb.get("fit_mu", False):
            target = emb.get("target_filling")
            if target is None:
                frag = list(emb["fragment"])
                target = float(np.trace(D_loc[np.ix_(frag, frag)]))
            builder = embedding.fragment_count_builder(m_loc, cb, exchange_factor=xf)
            mu = embedding.fit_chemical_potential(builder, target)
        return embedding.dmet_hamiltonian(m_loc, cb, mu=mu, exchange_factor=xf)
    except (mean_field.LinearDependenceError, mean_field.DegeneracyError,
            embedding.EmbeddingError, np.linalg.LinAlgError) as exc:
        raise NumericalError(str(exc)) from exc


def load_dataset(cfg: PipelineConfig, base_dir: str = ".") -> DatasetManifest:
    ds = cfg.dataset
    if ds["kind"] == "manifest":
        path = ds["path"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise DataError(f"manifest not found: {path}")
        try:
            return chem_io.load_manifest(path)
        except chem_io.ManifestError as exc:
            raise DataError(str(exc)) from exc
    zs = np.linspace(ds["rmin"], ds["rmax"], ds["count"])
    width = max(3, len(str(len(zs) - 1)))
    entries = [
        ManifestEntry(
            molecule_id=f"h2_{i:0{width}d}",
            source={"generator": {"kind": "h2", "separation": float(z)}},
            target=float(z),
            label=f"H2 z={z:.6f} bohr",
        )
        for i, z in enumerate(zs)
    ]
    return DatasetManifest(entries=entries)


def _noisy_fingerprint(eh, cfg: PipelineConfig, grid, molecule_id):
    spec = cfg.noise
    H = quantum_sim.jordan_wigner(eh)
    prep, _ = quantum_sim.prepare_initial(
        cfg.initial_state, H.n_qubits, eh.n_active_electrons
    )
    if cfg.observable["kind"] == "F":
        obs = lambda psi: quantum_sim.expval_F(eh.h_eff, quantum_sim.rdm1(psi))
    else:
        O = np.asarray(cfg.observable["matrix"], dtype=float)
        obs = lambda psi: quantum_sim.expval_O(O, quantum_sim.rdm1(psi))
    ns = quantum_sim.NoiseSpec(
        p=spec["p"], scale=spec.get("scale", 1), seed=spec.get("seed", 0)
    )
    vals = []
    for i, t in enumerate(grid):
        circ = prep + quantum_sim.trotter_sequence(
            H, float(t), order=cfg.evolver.get("order", 2), r=cfg.evolver.get("r", 1)
        )
        mean, _ = quantum_sim.noisy_expectation(
            circ, obs, ns, n_trajectories=spec.get("n_trajectories", 100),
            seed=spec.get("seed", 0) + i,
        )
        vals.append(mean)
    return fingerprint_ml.Fingerprint(
        molecule_id=molecule_id, time_grid=np.asarray(grid, float),
        label=f"{cfg.observable['kind']}|noisy-trotter", values=np.asarray(vals),
    )


def _one_fingerprint(entry, cfg, grid):
    m = build_molecule(entry)
    eh = embed_molecule(m, cfg.embedding)
    try:
        if cfg.noise is not None:
            fp = _noisy_fingerprint(eh, cfg, grid, entry.molecule_id)
        else:
            fp = fingerprint_ml.compute_fingerprint(
                eh, cfg.initial_state, grid, observable=cfg.observable,
                evolver=cfg.evolver, molecule_id=entry.molecule_id,
            )
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"molecule {entry.molecule_id!r}: {exc}") from exc
    return fp.values.reshape(len(grid), -1)


def run_fingerprints(cfg: PipelineConfig, base_dir: str = ".",
                     workers: int | None = None):
    """Fingerprints for every molecule in the dataset.

    Returns (ids, targets, grid, values) with values of shape
    (n_molecules, n_times * n_observable_components), rows in manifest order.
    """
    manifest = load_dataset(cfg, base_dir)
    grid = cfg.grid()
    ids = [e.molecule_id for e in manifest.entries]
    targets = np.array([e.target for e in manifest.entries])
    if not manifest.entries:
        return ids, targets, grid, np.zeros((0, len(grid)))
    n_workers = worker_count(workers)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        rows = list(pool.map(lambda e: _one_fingerprint(e, cfg, grid),
                             manifest.entries))
    values = np.stack([r.reshape(-1) for r in rows])
    return ids, targets, grid, values


def generate_h2_dataset(rmin: float, rmax: float, count: int, out_dir: str):
    """FCIDUMP files + manifest + targets for a uniform H2 separation scan."""
    if rmin < 0.2:
        raise ConfigError("--rmin: separations below 0.2 bohr are unsupported")
    if count < 2:
        raise ConfigError("--count: need at least 2 molecules")
    if rmax <= rmin:
        raise ConfigError("--rmax must exceed --rmin")
    os.makedirs(out_dir, exist_ok=True)
    zs = np.linspace(rmin, rmax, count)
    width = max(3, len(str(count - 1)))
    entries = []
    for i, z in enumerate(zs):
        mid = f"h2_{i:0{width}d}"
        m = chem_io.s_orbital_integrals(chem_io.h2_geometry(float(z)))
        mf = mean_field.scf_solve(m)
        if not mf.converged:
            raise NumericalError(f"SCF did not converge for z={z:.6f}")
        h_mo, eri_mo = embedding.transform_integrals(m.h_core, m.eri, mf.C)
        m_mo = MolecularIntegrals(
            n_orbitals=m.n_orbitals, n_electrons=m.n_electrons,
            S=np.eye(m.n_orbitals), h_core=h_mo, eri=eri_mo,
            e_nuclear=m.e_nuclear,
        )
        fname = f"{mid}.fcidump"
        with open(os.path.join(out_dir, fname), "w") as fh:
            fh.write(chem_io.emit_fcidump(m_mo))
        entries.append(ManifestEntry(
            molecule_id=mid, source={"fcidump": fname},
            target=float(z), label=f"H2 z={z:.6f} bohr",
        ))
    chem_io.save_manifest(DatasetManifest(entries=entries),
                          os.path.join(out_dir, "manifest.json"))
    with open(os.path.join(out_dir, "targets.csv"), "w") as fh:
        fh.write("molecule_id,target\n")
        for e in entries:
            fh.write(f"{e.molecule_id},{e.target:.17g}\n")
    return [e.molecule_id for e in entries]
