"""Run records and their on-disk formats.

Three interchange formats, all little endian / UTF-8:

* particle snapshots: binary, magic ``VPME``, then u32 version, u32 d,
  u64 N, f64 epsilon, f64 time, followed by the position block (N*d
  f64), the velocity block (N*d f64) and the weight block (N f64);
* grid fields: binary, magic ``VPMG``, then u32 version, u32 d, u64
  per-axis resolution, f64 epsilon, f64 time, an 8-byte ASCII field
  tag, u32 component count, and the row-major payload;
* run records: NDJSON, one object per line with a ``kind`` key
  (``header``, ``checkpoint``, ``verdict``), plus CSV summaries for
  experiment ladders.

Readers validate magic and version and fail with a structured error
naming the offending field rather than producing garbage.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .measures import GridDensity, ParticleEnsemble

SNAP_MAGIC = b"VPME"
GRID_MAGIC = b"VPMG"
FORMAT_VERSION = 1

_SNAP_HEADER = struct.Struct("<4sIIQdd")
_GRID_HEADER = struct.Struct("<4sIIQdd8sI")

SUMMARY_COLUMNS = ("epsilon", "eta", "sup_W1", "verdict", "fitted_C")
CHECKPOINT_COLUMNS = ("time", "kinetic", "field", "electron", "total_energy",
                      "m_k", "rho_sup", "rho_lp", "q_star", "grad_u_sup", "h_sup")


@dataclass(frozen=True)
class Verdict:
    """One named pass/fail outcome.

    ``asserted`` marks constant-free checks that the suite is allowed
    to enforce; fitted-constant checks are reported but never block.
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    asserted: bool
    fitted_constant: float | None = None


@dataclass(frozen=True)
class CheckpointRow:
    time: float
    kinetic: float
    field: float
    electron: float
    m_k: float
    rho_sup: float
    rho_lp: float
    q_star: float
    grad_u_sup: float
    h_sup: float

    @property
    def total_energy(self) -> float:
        return self.kinetic + self.field + self.electron


@dataclass
class RunRecord:
    d: int
    epsilon: float
    seed: int
    k0: float
    config_hash: str
    checkpoints: list[CheckpointRow] = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    trajectories: object | None = None
    verdicts: list[Verdict] = field(default_factory=list)
    wall_clock: float = 0.0

    def column(self, name: str) -> np.ndarray:
        if name == "total_energy":
            return np.array([c.total_energy for c in self.checkpoints])
        return np.array([getattr(c, name) for c in self.checkpoints])

    @property
    def times(self) -> np.ndarray:
        return self.column("time")


# ---------------------------------------------------------------------------
# binary snapshots
# ---------------------------------------------------------------------------


def write_ensemble(path, f: ParticleEnsemble) -> None:
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(SNAP_MAGIC, FORMAT_VERSION, f.d, f.n,
                                   f.epsilon, f.time))
        fh.write(np.ascontiguousarray(f.positions, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(f.velocities, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(f.weights, dtype="<f8").tobytes())


def read_ensemble(path) -> ParticleEnsemble:
    with open(path, "rb") as fh:
        header = fh.read(_SNAP_HEADER.size)
        if len(header) < _SNAP_HEADER.size:
            raise SchemaError("snapshot header truncated", field="header")
        magic, version, d, n, epsilon, time = _SNAP_HEADER.unpack(header)
        if magic != SNAP_MAGIC:
            raise SchemaError(f"bad snapshot magic {magic!r}", field="magic")
        if version != FORMAT_VERSION:
            raise SchemaError(f"unsupported snapshot version {version}",
                              field="version")
        body = np.frombuffer(fh.read(), dtype="<f8")
    need = 2 * n * d + n
    if body.size != need:
        raise SchemaError(
            f"snapshot payload has {body.size} doubles, expected {need}",
            field="payload")
    x = body[: n * d].reshape(n, d).astype(float)
    v = body[n * d: 2 * n * d].reshape(n, d).astype(float)
    w = body[2 * n * d:].astype(float)
    return ParticleEnsemble(positions=x, velocities=v, weights=w,
                            epsilon=epsilon, time=time)


def write_grid(path, values: np.ndarray, tag: str, epsilon: float = 0.0,
               time: float = 0.0) -> None:
    """Write a scalar or vector grid field.

    ``values`` is (n,)/(n, n) for scalars or (ncomp, n)/(ncomp, n, n)
    for vector fields; the tag is at most 8 ASCII bytes.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim in (1, 2) and (arr.ndim == 1 or arr.shape[0] == arr.shape[1]):
        comps = arr[None]
    else:
        comps = arr
    ncomp = comps.shape[0]
    d = comps.ndim - 1
    n = comps.shape[1]
    if comps.shape[1:] != (n,) * d:
        raise SchemaError("grid payload is not square", field="values")
    tag_bytes = tag.encode("ascii")
    if len(tag_bytes) > 8:
        raise SchemaError(f"field tag {tag!r} exceeds 8 bytes", field="tag")
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(GRID_MAGIC, FORMAT_VERSION, d, n, epsilon,
                                   time, tag_bytes.ljust(8, b"\0"), ncomp))
        fh.write(np.ascontiguousarray(comps, dtype="<f8").tobytes())


def read_grid(path):
    """Read a grid field; returns (values, meta dict).

    Scalar fields come back with the component axis squeezed off.
    """
    with open(path, "rb") as fh:
        header = fh.read(_GRID_HEADER.size)
        if len(header) < _GRID_HEADER.size:
            raise SchemaError("grid header truncated", field="header")
        magic, version, d, n, epsilon, time, tag, ncomp = _GRID_HEADER.unpack(header)
        if magic != GRID_MAGIC:
            raise SchemaError(f"bad grid magic {magic!r}", field="magic")
        if version != FORMAT_VERSION:
            raise SchemaError(f"unsupported grid version {version}", field="version")
        body = np.frombuffer(fh.read(), dtype="<f8")
    need = ncomp * n**d
    if body.size != need:
        raise SchemaError(
            f"grid payload has {body.size} doubles, expected {need}",
            field="payload")
    values = body.reshape((ncomp,) + (n,) * d).astype(float)
    if ncomp == 1:
        values = values[0]
    meta = {"d": d, "resolution": n, "epsilon": epsilon, "time": time,
            "tag": tag.rstrip(b"\0").decode("ascii"), "ncomp": ncomp}
    return values, meta


def grid_density_from_file(path) -> GridDensity:
    values, meta = read_grid(path)
    if meta["ncomp"] != 1:
        raise SchemaError("expected a scalar density grid", field="ncomp")
    return GridDensity(values=values)


# ---------------------------------------------------------------------------
# NDJSON run records
# ---------------------------------------------------------------------------


def write_run_record(path, record: RunRecord) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "kind": "header", "schema": FORMAT_VERSION, "d": record.d,
            "epsilon": record.epsilon, "seed": record.seed, "k0": record.k0,
            "config_hash": record.config_hash, "wall_clock": record.wall_clock,
        }
        fh.write(json.dumps(header) + "\n")
        for row in record.checkpoints:
            obj = {"kind": "checkpoint"}
            obj.update(dataclasses.asdict(row))
            obj["total_energy"] = row.total_energy
            fh.write(json.dumps(obj) + "\n")
        for v in record.verdicts:
            obj = {"kind": "verdict"}
            obj.update(dataclasses.asdict(v))
            fh.write(json.dumps(obj) + "\n")


def read_run_record(path) -> RunRecord:
    """Read the NDJSON form back (checkpoints and verdicts only;
    snapshots and trajectories live in their own binary files)."""
    record = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.pop("kind", None)
            if kind == "header":
                for key in ("d", "epsilon", "seed", "k0", "config_hash"):
                    if key not in obj:
                        raise SchemaError(f"run header missing {key!r}", field=key)
                record = RunRecord(d=obj["d"], epsilon=obj["epsilon"],
                                   seed=obj["seed"], k0=obj["k0"],
                                   config_hash=obj["config_hash"],
                                   wall_clock=obj.get("wall_clock", 0.0))
            elif kind == "checkpoint":
                if record is None:
                    raise SchemaError("checkpoint before header", field="kind")
                obj.pop("total_energy", None)
                missing = [k for k in CHECKPOINT_COLUMNS
                           if k != "total_energy" and k not in obj]
                if missing:
                    raise SchemaError(f"checkpoint missing {missing[0]!r}",
                                      field=missing[0])
                record.checkpoints.append(CheckpointRow(**obj))
            elif kind == "verdict":
                if record is None:
                    raise SchemaError("verdict before header", field="kind")
                record.verdicts.append(Verdict(**obj))
            else:
                raise SchemaError(f"line {line_no}: unknown kind {kind!r}",
                                  field="kind")
    if record is None:
        raise SchemaError("run record has no header line", field="header")
    return record


# ---------------------------------------------------------------------------
# CSV summaries
# ---------------------------------------------------------------------------


def write_summary_csv(path, rows) -> None:
    """Experiment ladder summary; one row per epsilon rung."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                f"{row['epsilon']:.12g}", f"{row['eta']:.12g}",
                f"{row['sup_W1']:.12g}", "pass" if row["verdict"] else "fail",
                f"{row['fitted_C']:.12g}",
            ])


def read_summary_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SUMMARY_COLUMNS:
            bad = header[0] if header else "<empty>"
            raise SchemaError(f"summary header mismatch near {bad!r}",
                              field=bad if header else "header")
        rows = []
        for raw in reader:
            if not raw:
                continue
            rows.append({
                "epsilon": float(raw[0]), "eta": float(raw[1]),
                "sup_W1": float(raw[2]), "verdict": raw[3] == "pass",
                "fitted_C": float(raw[4]),
            })
    return rows


def write_distance_series(path, times, measured, envelope) -> None:
    """NDJSON series of measured distances against a fitted envelope."""
    with open(path, "w", encoding="utf-8") as fh:
        for t, m, e in zip(times, measured, envelope):
            fh.write(json.dumps({"kind": "distance", "time": float(t),
                                 "measured": float(m),
                                 "envelope": float(e)}) + "\n")


def write_penrose_csv(path, sweep) -> None:
    """Flatten a stability-functional sweep to (gamma, tau, xi, value)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "tau", "xi", "value"])
        for ix, xi in enumerate(sweep.xis):
            for ig, gamma in enumerate(sweep.gammas):
                for it, tau in enumerate(sweep.taus):
                    writer.writerow([f"{gamma:.12g}", f"{tau:.12g}",
                                     f"{xi:.12g}",
                                     f"{sweep.values[ix, ig, it]:.12g}"])


__all__ = [
    "Verdict", "CheckpointRow", "RunRecord",
    "write_ensemble", "read_ensemble", "write_grid", "read_grid",
    "grid_density_from_file", "write_run_record", "read_run_record",
    "write_summary_csv", "read_summary_csv", "write_distance_series",
    "write_penrose_csv", "SNAP_MAGIC", "GRID_MAGIC", "FORMAT_VERSION",
    "SUMMARY_COLUMNS", "CHECKPOINT_COLUMNS",
]
