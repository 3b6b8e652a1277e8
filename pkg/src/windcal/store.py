"""File formats: model stores, forecast tables and run manifests.

Model stores are JSON Lines. Every float is written with 17 significant
digits so a reload reproduces it bit for bit; key order is kept as given.
Forecast tables are CSV with ``#`` comment lines carrying the model name and
interval level.
"""

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__, dists
from .errors import DataError, ParseError, SchemaError

STORE_FORMAT = "windcal-models/1"
FORECAST_COLUMNS = ["station", "init_date", "lead_time_index", "family", "par1", "par2", "par3",
                    "median", "mean", "lower", "upper"]
# par1..par3 hold (loc, scale, -) for tn, (m, v, -) for ln, (loc, scale, shape) for tgev


def _encode(obj):
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, (np.datetime64,)):
        return json.dumps(str(obj))
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj):
    """JSON text with 17-significant-digit floats."""
    return _encode(obj)


def atomic_write(path, text):
    """Write ``text`` through a temporary file in the same directory."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        # mkstemp creates mode 0600; give the result ordinary umask permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_store(path, header, records):
    lines = [dumps(dict({"format": STORE_FORMAT}, **header))]
    lines += [dumps(r) for r in records]
    atomic_write(path, "\n".join(lines) + "\n")


def read_store(path):
    """Return ``(header, records)`` of a model store."""
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise SchemaError(f"{path}: empty model store")
    out = []
    for i, ln in enumerate(lines, 1):
        try:
            out.append(json.loads(ln))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})", i) from exc
    header = out[0]
    if not isinstance(header, dict) or header.get("format") != STORE_FORMAT:
        raise SchemaError(f"{path}: not a model store (format {STORE_FORMAT} expected)")
    return header, out[1:]


# ---------------------------------------------------------------------------
# forecast tables


@dataclass
class ForecastTable:
    model: str
    level: float
    station: np.ndarray
    init_date: np.ndarray        # datetime64[D]
    lead: np.ndarray
    family: str
    params: np.ndarray           # (n, 3)

    def __len__(self):
        return self.lead.size

    def distribution(self):
        p = self.params
        if self.family == "tn":
            return dists.TruncNormal(p[:, 0], p[:, 1])
        if self.family == "ln":
            return dists.LogNormalMV(p[:, 0], p[:, 1])
        return dists.Tgev(p[:, 0], p[:, 1], p[:, 2])

    @classmethod
    def from_distribution(cls, model, level, station, init_date, lead, d):
        family = dists.family_of(d)
        par = [np.broadcast_to(np.asarray(v, dtype=float), np.shape(lead)) for v in dists.params_of(d)]
        while len(par) < 3:
            par.append(np.full(np.shape(lead), np.nan))
        return cls(model, float(level), np.asarray(station), np.asarray(init_date, dtype="datetime64[D]"),
                   np.asarray(lead, dtype=int), family, np.stack(par, axis=1).reshape(-1, 3))

    def keys(self):
        return list(zip(self.station.tolist(), self.init_date.astype(str).tolist(), self.lead.tolist()))


def _g(x):
    return "" if not math.isfinite(x) else format(float(x), ".17g")


def write_forecasts(path, table):
    from .scoring import IntervalSpec, central_interval
    n = len(table)
    lines = [f"# model={table.model}", f"# interval_level={table.level:.17g}", ",".join(FORECAST_COLUMNS)]
    if n:
        d = table.distribution()
        lo, hi = central_interval(d, IntervalSpec(table.level))
        med, mean = dists.median(d), dists.dist_mean(d)
        lo, hi, med, mean = (np.broadcast_to(v, (n,)) for v in (lo, hi, med, mean))
        dates = table.init_date.astype(str)
        for i in range(n):
            p = table.params[i]
            lines.append(",".join([str(table.station[i]), dates[i], str(int(table.lead[i])), table.family,
                                   _g(p[0]), _g(p[1]), _g(p[2]), _g(med[i]), _g(mean[i]),
                                   _g(lo[i]), _g(hi[i])]))
    atomic_write(path, "\n".join(lines) + "\n")


def read_forecasts(path):
    meta = {}
    rows = []
    try:
        with open(path, newline="") as fh:
            body = []
            for ln in fh:
                if ln.startswith("#"):
                    key, _, val = ln[1:].strip().partition("=")
                    meta[key.strip()] = val.strip()
                else:
                    body.append(ln)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(body)
    header = next(reader, None)
    if header != FORECAST_COLUMNS or "model" not in meta or "interval_level" not in meta:
        raise SchemaError(f"{path}: not a forecast table")
    for i, r in enumerate(reader, 2):
        if len(r) != len(FORECAST_COLUMNS):
            raise ParseError(f"{path}: expected {len(FORECAST_COLUMNS)} fields", i)
        rows.append(r)
    families = {r[3] for r in rows}
    if len(families) > 1 or not families <= set(dists.FAMILIES):
        raise SchemaError(f"{path}: forecast table must hold one known family")
    family = families.pop() if families else "tn"
    try:
        params = np.array([[float(v) if v else np.nan for v in r[4:7]] for r in rows]).reshape(-1, 3)
        lead = np.array([int(r[2]) for r in rows], dtype=int)
        init = np.array([r[1] for r in rows], dtype="datetime64[D]")
        level = float(meta["interval_level"])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}", 0) from exc
    station = np.array([r[0] for r in rows], dtype=object)
    return ForecastTable(meta["model"], level, station, init, lead, family, params)


# ---------------------------------------------------------------------------
# manifests


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, config, inputs=(), seed=None, started=None):
    """Record what produced a set of outputs.

    Timestamps are the only fields expected to differ between reruns.
    """
    now = datetime.now(timezone.utc).isoformat(timespec="seconds")
    manifest = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {os.path.basename(p): file_digest(p) for p in inputs},
        "started": started or now,
        "finished": now,
    }
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return manifest
