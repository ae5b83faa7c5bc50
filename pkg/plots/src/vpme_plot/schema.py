"""Readers for the vpme interchange files.

Five formats, parsed independently of the simulation package:

* run records: NDJSON, a ``header`` line followed by ``checkpoint``
  and ``verdict`` lines;
* distance series: NDJSON, one ``distance`` line per checkpoint with
  the measured transport distance and the fitted envelope;
* ladder summaries: CSV with columns epsilon, eta, sup_W1, verdict,
  fitted_C;
* stability-functional sweeps: CSV with columns gamma, tau, xi, value
  covering a full (xi, gamma, tau) grid;
* particle snapshots: binary, magic ``VPME``, a ``<4sIIQdd`` header
  (magic, version, d, N, epsilon, time) and three little-endian f8
  blocks (positions N*d, velocities N*d, weights N).

Every reader validates magic bytes, schema versions, headers, and
payload sizes up front and raises :class:`SchemaMismatch` naming the
offending field or column; figure code downstream never has to guess
why a file failed to parse.
"""

from __future__ import annotations

import csv
import json
import re
import struct
from dataclasses import dataclass

import numpy as np

SCHEMA_VERSION = 1
SNAP_MAGIC = b"VPME"
_SNAP_HEADER = struct.Struct("<4sIIQdd")

SUMMARY_COLUMNS = ("epsilon", "eta", "sup_W1", "verdict", "fitted_C")
SWEEP_COLUMNS = ("gamma", "tau", "xi", "value")
_HEADER_KEYS = ("schema", "d", "epsilon", "seed", "k0", "config_hash")

_EPS_IN_NAME = re.compile(r"eps([0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)")


class SchemaMismatch(Exception):
    """Input file does not match the documented layout.

    ``field`` names the missing or malformed column/key so the CLI can
    report it verbatim.
    """

    def __init__(self, message: str, field=None):
        super().__init__(message)
        self.field = field


def _json_line(path, line_no: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(
            f"{path}:{line_no}: not valid JSON ({exc.msg})", field="json")
    if not isinstance(obj, dict):
        raise SchemaMismatch(f"{path}:{line_no}: expected a JSON object",
                             field="json")
    return obj


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunLog:
    """Header metadata plus raw checkpoint and verdict rows."""

    schema: int
    d: int
    epsilon: float
    seed: int
    k0: float
    config_hash: str
    wall_clock: float
    checkpoints: tuple
    verdicts: tuple

    def column(self, name: str) -> np.ndarray:
        """One checkpoint column as an array; names the column if any
        row lacks it."""
        values = []
        for row in self.checkpoints:
            if name not in row:
                raise SchemaMismatch(
                    f"checkpoint row is missing column {name!r}", field=name)
            values.append(float(row[name]))
        return np.array(values)

    @property
    def times(self) -> np.ndarray:
        return self.column("time")


def read_run_log(path) -> RunLog:
    header = None
    checkpoints = []
    verdicts = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = _json_line(path, line_no, line)
            kind = obj.pop("kind", None)
            if kind == "header":
                for key in _HEADER_KEYS:
                    if key not in obj:
                        raise SchemaMismatch(
                            f"run header is missing {key!r}", field=key)
                if obj["schema"] != SCHEMA_VERSION:
                    raise SchemaMismatch(
                        f"run record schema {obj['schema']} does not match "
                        f"supported version {SCHEMA_VERSION}", field="schema")
                header = obj
            elif kind in ("checkpoint", "verdict"):
                if header is None:
                    raise SchemaMismatch(
                        f"{path}:{line_no}: {kind} line before header",
                        field="header")
                (checkpoints if kind == "checkpoint" else verdicts).append(obj)
            else:
                raise SchemaMismatch(
                    f"{path}:{line_no}: unknown line kind {kind!r}",
                    field="kind")
    if header is None:
        raise SchemaMismatch(f"{path}: no header line", field="header")
    return RunLog(schema=header["schema"], d=header["d"],
                  epsilon=header["epsilon"], seed=header["seed"],
                  k0=header["k0"], config_hash=header["config_hash"],
                  wall_clock=header.get("wall_clock", 0.0),
                  checkpoints=tuple(checkpoints), verdicts=tuple(verdicts))


# ---------------------------------------------------------------------------
# distance series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistanceSeries:
    times: np.ndarray
    measured: np.ndarray
    envelope: np.ndarray


def read_distance_series(path) -> DistanceSeries:
    times, measured, envelope = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = _json_line(path, line_no, line)
            if obj.get("kind") != "distance":
                raise SchemaMismatch(
                    f"{path}:{line_no}: expected kind 'distance', got "
                    f"{obj.get('kind')!r}", field="kind")
            for key, dest in (("time", times), ("measured", measured),
                              ("envelope", envelope)):
                if key not in obj:
                    raise SchemaMismatch(
                        f"{path}:{line_no}: distance line is missing "
                        f"{key!r}", field=key)
                dest.append(float(obj[key]))
    return DistanceSeries(times=np.array(times), measured=np.array(measured),
                          envelope=np.array(envelope))


def epsilon_from_name(path) -> float | None:
    """Ladder rung encoded in a file name like ``distances_eps0.4``."""
    match = _EPS_IN_NAME.search(str(path))
    return float(match.group(1)) if match else None


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def _csv_rows(path, expected: tuple) -> tuple[list, dict]:
    """Rows of a CSV plus a name-to-index map for ``expected``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaMismatch(f"{path}: empty file, no header row",
                                 field="header")
        for name in expected:
            if name not in header:
                raise SchemaMismatch(
                    f"{path}: header is missing column {name!r}", field=name)
        index = {name: header.index(name) for name in expected}
        rows = [row for row in reader if row]
    width = max(index.values()) + 1
    for row in rows:
        if len(row) < width:
            raise SchemaMismatch(
                f"{path}: row has {len(row)} cells, expected at least "
                f"{width}", field="row")
    return rows, index


def _cell_float(path, row, index, name: str) -> float:
    try:
        return float(row[index[name]])
    except ValueError:
        raise SchemaMismatch(
            f"{path}: column {name!r} has non-numeric cell "
            f"{row[index[name]]!r}", field=name)


def read_summary(path) -> list:
    """Ladder summary rows as dicts with a boolean ``verdict``."""
    raw, index = _csv_rows(path, SUMMARY_COLUMNS)
    rows = []
    for row in raw:
        verdict = row[index["verdict"]]
        if verdict not in ("pass", "fail"):
            raise SchemaMismatch(
                f"{path}: verdict cell must be 'pass' or 'fail', got "
                f"{verdict!r}", field="verdict")
        rows.append({
            "epsilon": _cell_float(path, row, index, "epsilon"),
            "eta": _cell_float(path, row, index, "eta"),
            "sup_W1": _cell_float(path, row, index, "sup_W1"),
            "verdict": verdict == "pass",
            "fitted_C": _cell_float(path, row, index, "fitted_C"),
        })
    return rows


@dataclass(frozen=True)
class SweepTable:
    """Stability-functional values on a full (xi, gamma, tau) grid."""

    xis: np.ndarray
    gammas: np.ndarray
    taus: np.ndarray
    values: np.ndarray

    @property
    def infimum(self) -> float:
        return float(self.values.min())


def read_sweep(path) -> SweepTable:
    raw, index = _csv_rows(path, SWEEP_COLUMNS)
    if not raw:
        empty = np.empty(0)
        return SweepTable(xis=empty, gammas=empty, taus=empty,
                          values=np.empty((0, 0, 0)))
    cols = {name: np.array([_cell_float(path, row, index, name)
                            for row in raw])
            for name in SWEEP_COLUMNS}
    xis = np.unique(cols["xi"])
    gammas = np.unique(cols["gamma"])
    taus = np.unique(cols["tau"])
    values = np.full((xis.size, gammas.size, taus.size), np.nan)
    ix = np.searchsorted(xis, cols["xi"])
    ig = np.searchsorted(gammas, cols["gamma"])
    it = np.searchsorted(taus, cols["tau"])
    values[ix, ig, it] = cols["value"]
    if np.isnan(values).any():
        raise SchemaMismatch(
            f"{path}: sweep rows do not cover the full (xi, gamma, tau) "
            "grid", field="value")
    return SweepTable(xis=xis, gammas=gammas, taus=taus, values=values)


# ---------------------------------------------------------------------------
# particle snapshots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    epsilon: float
    time: float

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        header = fh.read(_SNAP_HEADER.size)
        if len(header) < _SNAP_HEADER.size:
            raise SchemaMismatch(f"{path}: snapshot header truncated",
                                 field="header")
        magic, version, d, n, epsilon, time = _SNAP_HEADER.unpack(header)
        if magic != SNAP_MAGIC:
            raise SchemaMismatch(f"{path}: bad snapshot magic {magic!r}",
                                 field="magic")
        if version != SCHEMA_VERSION:
            raise SchemaMismatch(
                f"{path}: snapshot version {version} does not match "
                f"supported version {SCHEMA_VERSION}", field="version")
        body = np.frombuffer(fh.read(), dtype="<f8")
    need = 2 * n * d + n
    if body.size != need:
        raise SchemaMismatch(
            f"{path}: snapshot payload has {body.size} doubles, expected "
            f"{need}", field="payload")
    return Snapshot(
        positions=body[: n * d].reshape(n, d).astype(float),
        velocities=body[n * d: 2 * n * d].reshape(n, d).astype(float),
        weights=body[2 * n * d:].astype(float),
        epsilon=epsilon, time=time)


__all__ = [
    "SCHEMA_VERSION", "SUMMARY_COLUMNS", "SWEEP_COLUMNS", "SchemaMismatch",
    "RunLog", "read_run_log", "DistanceSeries", "read_distance_series",
    "epsilon_from_name", "read_summary", "SweepTable", "read_sweep",
    "Snapshot", "read_snapshot",
]
