"""Molecular integral ingest/emit and analytic s-orbital Gaussian integrals.

Hydrogen systems (H2, hydrogen chains) are generated internally from
closed-form formulas for s-type Gaussians; everything else enters through
FCIDUMP interchange files.  Feature tables and dataset manifests round-trip
through CSV/JSON.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

__all__ = [
    "GaussianGeometry",
    "MolecularIntegrals",
    "DatasetManifest",
    "ManifestEntry",
    "STO3G_HYDROGEN",
    "hydrogen_chain",
    "h2_geometry",
    "s_orbital_integrals",
    "parse_fcidump",
    "emit_fcidump",
    "load_manifest",
    "save_manifest",
    "save_features",
    "load_features",
    "FcidumpError",
    "ManifestError",
]

# STO-3G 1s contraction for hydrogen: (exponent / bohr^-2, coefficient).
STO3G_HYDROGEN = (
    (3.42525091, 0.15432897),
    (0.62391373, 0.53532814),
    (0.16885540, 0.44463454),
)


class FcidumpError(ValueError):
    """Raised for malformed FCIDUMP text; carries the offending line number."""


class ManifestError(ValueError):
    """Raised for malformed or inconsistent dataset manifests."""


@dataclass(frozen=True)
class GaussianGeometry:
    """All-s-orbital molecular geometry.

    atoms: sequence of (nuclear charge Z, position 3-vector in bohr).
    shells: one list of (exponent, contraction coefficient) primitives per atom.
    """

    atoms: tuple
    shells: tuple

    def __post_init__(self):
        if len(self.atoms) != len(self.shells):
            raise ValueError("one shell list per atom required")
        for z, pos in self.atoms:
            if not np.all(np.isfinite(pos)):
                raise ValueError("non-finite atomic position")
            if z <= 0:
                raise ValueError("nuclear charge must be positive")
        for prims in self.shells:
            if len(prims) == 0:
                raise ValueError("every atom needs at least one primitive")
            for alpha, _ in prims:
                if alpha <= 0:
                    raise ValueError("Gaussian exponents must be positive")


def h2_geometry(separation: float) -> GaussianGeometry:
    """H2 along z at the given bond length (bohr), STO-3G."""
    return hydrogen_chain([0.0, separation])


def hydrogen_chain(z_positions) -> GaussianGeometry:
    """Linear chain of hydrogen atoms at the given z coordinates (bohr)."""
    atoms = tuple((1, np.array([0.0, 0.0, z])) for z in z_positions)
    shells = tuple(STO3G_HYDROGEN for _ in z_positions)
    return GaussianGeometry(atoms=atoms, shells=shells)


@dataclass
class MolecularIntegrals:
    """AO-basis integrals: overlap, core Hamiltonian, ERIs (chemist (pq|rs))."""

    n_orbitals: int
    n_electrons: int
    S: np.ndarray
    h_core: np.ndarray
    eri: np.ndarray
    e_nuclear: float

    def validate(self, tol: float = 1e-8) -> None:
        n = self.n_orbitals
        assert self.S.shape == (n, n) and self.h_core.shape == (n, n)
        assert self.eri.shape == (n, n, n, n)
        assert np.all(np.isfinite(self.S)) and np.all(np.isfinite(self.h_core))
        assert np.all(np.isfinite(self.eri))
        assert np.allclose(self.S, self.S.T, atol=tol)
        assert np.allclose(self.h_core, self.h_core.T, atol=tol)
        for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]:
            assert np.allclose(self.eri, self.eri.transpose(perm), atol=tol)
        assert self.n_electrons % 2 == 0 and self.n_electrons > 0


def _boys_f0(x: np.ndarray) -> np.ndarray:
    """Boys function F0(x), stable at x -> 0 via the Taylor branch."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-6
    xs = x[small]
    out[small] = 1.0 - xs / 3.0 + xs * xs / 10.0
    xl = x[~small]
    out[~small] = 0.5 * np.sqrt(np.pi / xl) * erf(np.sqrt(xl))
    return out


def s_orbital_integrals(g: GaussianGeometry, n_electrons: int | None = None) -> MolecularIntegrals:
    """Overlap, core Hamiltonian and ERIs for contracted s-Gaussians.

    One contracted basis function per atom, renormalized so that the
    diagonal of S is exactly 1.  Nuclear repulsion from point charges.
    """
    centers = np.array([pos for _, pos in g.atoms], dtype=float)
    charges = np.array([z for z, _ in g.atoms], dtype=float)
    n = len(g.atoms)

    for a in range(n):
        for b in range(a + 1, n):
            if np.linalg.norm(centers[a] - centers[b]) < 1e-10:
                raise ValueError("coincident nuclei give a singular attraction integral")

    # Flatten primitives with primitive normalization folded into the coefficient.
    prim_alpha, prim_coef, prim_center, prim_fn = [], [], [], []
    for i, prims in enumerate(g.shells):
        for alpha, c in prims:
            prim_alpha.append(alpha)
            prim_coef.append(c * (2.0 * alpha / np.pi) ** 0.75)
            prim_center.append(centers[i])
            prim_fn.append(i)
    alpha = np.array(prim_alpha)
    coef = np.array(prim_coef)
    A = np.array(prim_center)
    fn = np.array(prim_fn)
    m = len(alpha)

    # Pairwise primitive quantities.
    p = alpha[:, None] + alpha[None, :]
    mu = alpha[:, None] * alpha[None, :] / p
    ab2 = np.sum((A[:, None, :] - A[None, :, :]) ** 2, axis=-1)
    K = np.exp(-mu * ab2)
    P = (alpha[:, None, None] * A[:, None, :] + alpha[None, :, None] * A[None, :, :]) / p[:, :, None]

    s_prim = (np.pi / p) ** 1.5 * K
    t_prim = mu * (3.0 - 2.0 * mu * ab2) * s_prim

    pc2 = np.sum((P[:, :, None, :] - centers[None, None, :, :]) ** 2, axis=-1)
    v_prim = -(2.0 * np.pi / p)[:, :, None] * K[:, :, None] * _boys_f0(p[:, :, None] * pc2)
    v_prim = np.einsum("abc,c->ab", v_prim, charges)

    cc = coef[:, None] * coef[None, :]

    def contract2(prim):
        out = np.zeros((n, n))
        np.add.at(out, (fn[:, None], fn[None, :]), cc * prim)
        return out

    S = contract2(s_prim)
    # Renormalize contracted functions so S_ii = 1.
    norm = 1.0 / np.sqrt(np.diag(S))
    coef = coef * norm[fn]
    cc = coef[:, None] * coef[None, :]
    S = contract2(s_prim)
    h = contract2(t_prim + v_prim)

    # Two-electron integrals (ab|cd) over primitives, then contracted.
    q = p  # alias for the ket pair in the formulas below
    eri = np.zeros((n, n, n, n))
    pref = 2.0 * np.pi ** 2.5
    for a in range(m):
        for b in range(m):
            pab = p[a, b]
            Kab = K[a, b]
            if Kab * abs(cc[a, b]) < 1e-18:
                continue
            Pab = P[a, b]
            pq2 = np.sum((Pab[None, None, :] - P) ** 2, axis=-1)
            val = (
                pref
                / (pab * q * np.sqrt(pab + q))
                * Kab
                * K
                * _boys_f0(pab * q / (pab + q) * pq2)
            )
            val = cc[a, b] * cc * val
            np.add.at(eri, (fn[a], fn[b], fn[:, None], fn[None, :]), val)

    # Enforce the 8-fold permutation symmetry exactly (summation-order noise
    # between equivalent primitive loops is ~1e-17 otherwise).
    eri = (eri + eri.transpose(1, 0, 2, 3)) / 2.0
    eri = (eri + eri.transpose(0, 1, 3, 2)) / 2.0
    eri = (eri + eri.transpose(2, 3, 0, 1)) / 2.0

    e_nuc = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            e_nuc += charges[a] * charges[b] / np.linalg.norm(centers[a] - centers[b])

    if n_electrons is None:
        n_electrons = int(round(charges.sum()))
        if n_electrons % 2 == 1:
            raise ValueError("odd electron count; pass n_electrons explicitly")

    out = MolecularIntegrals(
        n_orbitals=n,
        n_electrons=n_electrons,
        S=S,
        h_core=h,
        eri=eri,
        e_nuclear=e_nuc,
    )
    out.validate()
    return out


# ---------------------------------------------------------------------------
# FCIDUMP interchange
# ---------------------------------------------------------------------------

def _eri_images(p, q, r, s):
    return {
        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
    }


def parse_fcidump(text: str) -> MolecularIntegrals:
    """Parse FCIDUMP text (1-based indices, zero indices flag 1e/core records)."""
    lines = text.splitlines()
    header_end = None
    header = ""
    for i, line in enumerate(lines):
        header += " " + line
        if "&END" in line.upper() or line.strip() == "/":
            header_end = i
            break
    if header_end is None:
        raise FcidumpError("line 1: no &END terminator found in FCIDUMP header")

    def header_int(key):
        up = header.upper()
        pos = up.find(key + "=")
        if pos < 0:
            raise FcidumpError(f"line 1: missing {key} in header")
        rest = up[pos + len(key) + 1:]
        tok = rest.split(",")[0].split()[0]
        try:
            return int(tok)
        except ValueError as exc:
            raise FcidumpError(f"line 1: non-integer {key}={tok!r}") from exc

    norb = header_int("NORB")
    nelec = header_int("NELEC")
    if norb < 1:
        raise FcidumpError("line 1: NORB must be >= 1")

    h = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    e_nuc = 0.0
    for ln, line in enumerate(lines[header_end + 1:], start=header_end + 2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FcidumpError(f"line {ln}: expected `value p q r s`, got {len(parts)} fields")
        try:
            val = float(parts[0].replace("D", "E").replace("d", "e"))
        except ValueError as exc:
            raise FcidumpError(f"line {ln}: non-numeric value {parts[0]!r}") from exc
        try:
            p, q, r, s = (int(t) for t in parts[1:])
        except ValueError as exc:
            raise FcidumpError(f"line {ln}: non-integer index") from exc
        for idx in (p, q, r, s):
            if idx < 0 or idx > norb:
                raise FcidumpError(f"line {ln}: index {idx} out of range 0..{norb}")
        if p == q == r == s == 0:
            e_nuc = val
        elif r == 0 and s == 0:
            if p == 0 or q == 0:
                raise FcidumpError(f"line {ln}: malformed one-electron record")
            h[p - 1, q - 1] = val
            h[q - 1, p - 1] = val
        elif 0 in (p, q, r, s):
            raise FcidumpError(f"line {ln}: mixed zero/nonzero indices")
        else:
            for a, b, c, d in _eri_images(p - 1, q - 1, r - 1, s - 1):
                eri[a, b, c, d] = val

    return MolecularIntegrals(
        n_orbitals=norb,
        n_electrons=nelec,
        S=np.eye(norb),
        h_core=h,
        eri=eri,
        e_nuclear=e_nuc,
    )


def emit_fcidump(m: MolecularIntegrals) -> str:
    """Emit canonical FCIDUMP text: unique representatives, descending tuples."""
    n = m.n_orbitals
    out = [f"&FCI NORB={n},NELEC={m.n_electrons},MS2=0,", " ISYM=1,", "&END"]

    reps = set()
    for p in range(n):
        for q in range(p + 1):
            for r in range(n):
                for s in range(r + 1):
                    if (p, q) < (r, s):
                        continue
                    reps.add((p, q, r, s))
    for p, q, r, s in sorted(reps, reverse=True):
        val = m.eri[p, q, r, s]
        if abs(val) < 1e-14:
            continue
        out.append(f"{val:24.16E} {p + 1} {q + 1} {r + 1} {s + 1}")
    for p in range(n - 1, -1, -1):
        for q in range(p, -1, -1):
            val = m.h_core[p, q]
            if abs(val) < 1e-14:
                continue
            out.append(f"{val:24.16E} {p + 1} {q + 1} 0 0")
    out.append(f"{m.e_nuclear:24.16E} 0 0 0 0")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Dataset manifests and feature tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    molecule_id: str
    source: dict  # {"fcidump": path} or {"generator": {...params}}
    target: float
    label: str


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    format_version: int = 1


def load_manifest(path: str) -> DatasetManifest:
    """Load and validate a dataset manifest JSON file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "entries" not in raw:
        raise ManifestError(f"{path}: manifest must be an object with an `entries` list")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = set()
    for e in raw["entries"]:
        mid = str(e["id"])
        if mid in seen:
            raise ManifestError(f"{path}: duplicate molecule id {mid!r}")
        seen.add(mid)
        source = {}
        if "fcidump" in e:
            fpath = e["fcidump"]
            if not os.path.isabs(fpath):
                fpath = os.path.join(base, fpath)
            if not os.path.exists(fpath):
                raise ManifestError(f"{path}: id {mid!r} references missing file {fpath}")
            source["fcidump"] = fpath
        elif "generator" in e:
            source["generator"] = dict(e["generator"])
        else:
            raise ManifestError(f"{path}: id {mid!r} has neither `fcidump` nor `generator`")
        entries.append(
            ManifestEntry(
                molecule_id=mid,
                source=source,
                target=float(e.get("target", math.nan)),
                label=str(e.get("label", "")),
            )
        )
    return DatasetManifest(entries=entries, format_version=int(raw.get("format_version", 1)))


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    raw = {
        "format_version": manifest.format_version,
        "entries": [
            {
                "id": e.molecule_id,
                **e.source,
                "target": e.target,
                "label": e.label,
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=1)
        fh.write("\n")


def save_features(ids, time_grid, values, path) -> None:
    """Write a feature table CSV: `molecule_id, t=<v1>, ...`, 17 sig digits."""
    values = np.asarray(values, dtype=float)
    if values.shape != (len(ids), len(time_grid)):
        raise ValueError("feature table shape does not match ids x time grid")
    with open(path, "w") as fh:
        fh.write("molecule_id," + ",".join(f"t={t:.17g}" for t in time_grid) + "\n")
        for mid, row in zip(ids, values):
            fh.write(str(mid) + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


def load_features(path):
    """Inverse of save_features; returns (ids, time_grid, values)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[0] != "molecule_id":
            raise ValueError(f"{path}: not a feature table (bad header)")
        grid = np.array([float(c[2:]) for c in header[1:]])
        ids, rows = [], []
        for ln, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(header):
                raise ValueError(f"{path}: line {ln}: expected {len(header)} fields")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    values = np.array(rows) if rows else np.zeros((0, len(grid)))
    return ids, grid, values
