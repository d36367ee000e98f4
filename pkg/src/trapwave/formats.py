"""File formats: potential-matrix cache, voltage/target/waveform/DAC/report CSVs, run manifests.

Every float is written with 17 significant digits so a read-back is bit-identical.
Header lines start with ``#`` and hold ``key=value`` pairs.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArgumentError, TrapIOError
from .fields import PotentialMatrix
from .geometry import Grid, TrapConfig
from .solver import TargetPotential, VoltageSet
from .waveform import DacFrame, Frame, FrequencyProfile, Species, Waveform, dac_lsb, quantize

MATRIX_MAGIC = b"TRAPWAVE-AMATRIX\n"
MATRIX_VERSION = 1


def fmt(x):
    return format(float(x), ".17g")


def atomic_write(path, data: bytes):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise TrapIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise TrapIOError(f"cannot read {path}: {exc.strerror or exc}") from exc


def file_digest(path):
    return hashlib.sha256(read_bytes(path)).hexdigest()


# -- potential matrix cache -------------------------------------------------


def matrix_bytes(A, extra=None):
    M, N = A.shape
    header = {
        **(extra or {}),
        "version": MATRIX_VERSION,
        "config_hash": A.config.digest(),
        "matrix_hash": A.digest(),
        "M": M,
        "N": N,
        "z_start": A.grid.start,
        "step": A.grid.step,
        "dtype": "<f8",
        "order": "row-major",
        "config": A.config.to_dict(),
    }
    line = json.dumps(header, sort_keys=True).encode() + b"\n"
    return MATRIX_MAGIC + line + np.ascontiguousarray(A.values, dtype="<f8").tobytes()


def write_matrix(A, path, extra=None):
    atomic_write(path, matrix_bytes(A, extra))


def read_matrix(path):
    blob = read_bytes(path)
    if not blob.startswith(MATRIX_MAGIC):
        raise TrapIOError(f"{path}: not a potential-matrix cache")
    rest = blob[len(MATRIX_MAGIC) :]
    nl = rest.find(b"\n")
    try:
        header = json.loads(rest[:nl])
    except (ValueError, UnicodeDecodeError) as exc:
        raise TrapIOError(f"{path}: corrupt cache header") from exc
    if header.get("version") != MATRIX_VERSION:
        raise TrapIOError(f"{path}: unsupported cache version {header.get('version')!r}")
    M, N = header["M"], header["N"]
    payload = rest[nl + 1 :]
    if len(payload) != 8 * M * N:
        raise TrapIOError(f"{path}: expected {M}x{N} entries, found {len(payload) // 8}")
    values = np.frombuffer(payload, dtype="<f8").reshape(M, N).astype(float)
    config = TrapConfig(**header["config"])
    if config.digest() != header["config_hash"]:
        raise TrapIOError(f"{path}: config hash mismatch")
    grid = Grid(header["z_start"] + header["step"] * np.arange(M), header["step"])
    return PotentialMatrix(values, grid, config)


def cache_dir():
    return Path(os.environ.get("TRAP_CACHE_DIR") or Path.home() / ".cache" / "trapwave")


def cached_matrix(config, grid, directory=None):
    """Load the matrix for (config, grid) from the cache directory, assembling it on a miss."""
    from .fields import assemble_matrix
    from .geometry import build_trap

    probe = PotentialMatrix(np.zeros((len(grid), 1)), grid, config)
    path = Path(directory or cache_dir()) / f"{probe.digest()}.amat"
    if path.exists():
        A = read_matrix(path)
        if A.digest() == probe.digest():
            return A, path
    A = assemble_matrix(build_trap(config), grid)
    write_matrix(A, path)
    return A, path


# -- CSV helpers --------------------------------------------------------------


def _cell(c):
    if isinstance(c, str):
        return c
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return fmt(c)


def _csv_text(header, columns, rows):
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(c) for c in r])
    return buf.getvalue().encode()


def _read_csv(path):
    text = read_bytes(path).decode()
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise TrapIOError(f"{path}: no column header")
    return header, rows[0], rows[1:]


# -- voltage sets and targets ---------------------------------------------------


def write_voltages(v, path, header=None):
    volts = np.asarray(getattr(v, "volts", v), dtype=float)
    hdr = dict(header or {})
    if getattr(v, "alpha", None) is not None:
        hdr.setdefault("alpha", fmt(v.alpha))
    rows = [(i + 1, x) for i, x in enumerate(volts)]
    atomic_write(path, _csv_text(hdr, ["electrode", "volts"], rows))


def read_voltages(path):
    _, columns, rows = _read_csv(path)
    try:
        pairs = sorted((int(r[0]), float(r[1])) for r in rows)
    except (ValueError, IndexError) as exc:
        raise TrapIOError(f"{path}: malformed voltage file") from exc
    if [p[0] for p in pairs] != list(range(1, len(pairs) + 1)):
        raise TrapIOError(f"{path}: electrode indices must run 1..N")
    return VoltageSet(np.array([p[1] for p in pairs]))


def write_target(target, grid, path):
    rows = [(grid.z[j], target.values[j]) for j in target.window]
    atomic_write(path, _csv_text({}, ["z_m", "phi_V"], rows))


def read_target(path, grid):
    """Target file: rows of (z_m, phi_V) on grid points; the listed rows form the window."""
    _, _, rows = _read_csv(path)
    values = np.full(len(grid), np.nan)
    window = []
    try:
        for r in rows:
            j = grid.index_of(float(r[0]))
            values[j] = float(r[1])
            window.append(j)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ArgumentError):
            raise
        raise TrapIOError(f"{path}: malformed target file") from exc
    return TargetPotential(values, np.array(sorted(window)))


# -- waveforms ------------------------------------------------------------------

_WAVE_COLUMNS = ["index", "time_s", "z_target_m", "omega_target_rad_s", "alpha"]


def _waveform_header(w, extra=None):
    hdr = {
        "format": "trapwave-waveform-1",
        "config_hash": w.config_hash,
        "species_mass_kg": fmt(w.species.mass),
        "species_charge_C": fmt(w.species.charge),
        "frame_spacing_m": fmt(w.frame_spacing),
        "frame_period_s": fmt(w.frame_period),
        "v_max_V": fmt(w.v_max),
    }
    if w.profile is not None:
        for k, v in w.profile.to_dict().items():
            hdr[f"profile_{k}"] = fmt(v)
    hdr.update(extra or {})
    return hdr


def write_waveform(w, path, header=None):
    n = w.voltages.shape[1]
    columns = _WAVE_COLUMNS + [f"v{i + 1}" for i in range(n)]
    rows = [(k, t, f.z, f.omega, f.alpha, *f.voltages.volts) for k, (t, f) in enumerate(zip(w.times, w.frames))]
    atomic_write(path, _csv_text(_waveform_header(w, header), columns, rows))


def _waveform_meta(header, path):
    try:
        species = Species(float(header["species_mass_kg"]), float(header["species_charge_C"]))
        profile = None
        if "profile_mean" in header:
            profile = FrequencyProfile(
                float(header["profile_mean"]),
                float(header["profile_amplitude"]),
                float(header["profile_period"]),
                float(header["profile_origin"]),
            )
        return dict(
            frame_spacing=float(header["frame_spacing_m"]),
            frame_period=float(header["frame_period_s"]),
            species=species,
            profile=profile,
            config_hash=header.get("config_hash", ""),
            v_max=float(header["v_max_V"]),
        )
    except (KeyError, ValueError) as exc:
        raise TrapIOError(f"{path}: waveform header incomplete ({exc})") from exc


def read_waveform(path):
    header, columns, rows = _read_csv(path)
    if columns[: len(_WAVE_COLUMNS)] != _WAVE_COLUMNS:
        raise TrapIOError(f"{path}: not a waveform file")
    meta = _waveform_meta(header, path)
    frames = []
    for r in rows:
        z, omega, alpha = float(r[2]), float(r[3]), float(r[4])
        frames.append(Frame(z, omega, VoltageSet(np.array([float(x) for x in r[5:]]), alpha), alpha))
    return Waveform(tuple(frames), **meta)


def write_dac(w, path, bits, header=None):
    lsb = dac_lsb(bits, w.v_max)
    extra = {"dac_bits": bits, "lsb_V": fmt(lsb), **(header or {})}
    n = w.voltages.shape[1]
    columns = _WAVE_COLUMNS + [f"code{i + 1}" for i in range(n)]
    rows = []
    for k, (t, f) in enumerate(zip(w.times, w.frames)):
        codes = quantize(f.voltages, bits, w.v_max).codes
        rows.append((k, t, f.z, f.omega, f.alpha, *[int(c) for c in codes]))
    atomic_write(path, _csv_text(_waveform_header(w, extra), columns, rows))


def read_dac(path):
    """Returns (waveform of decoded voltages, list of DacFrame)."""
    header, columns, rows = _read_csv(path)
    meta = _waveform_meta(header, path)
    lsb = float(header["lsb_V"])
    frames, dac = [], []
    for r in rows:
        codes = np.array([int(x) for x in r[5:]], dtype=np.int64)
        d = DacFrame(codes, lsb, meta["v_max"])
        dac.append(d)
        frames.append(Frame(float(r[2]), float(r[3]), VoltageSet(d.decode(), float(r[4])), float(r[4])))
    return Waveform(tuple(frames), **meta), dac


# -- probe reports ------------------------------------------------------------


def write_report(report, path, header=None):
    from .probe import COLUMNS

    hdr = {k: fmt(v) if isinstance(v, float) else v for k, v in report.summary().items()}
    hdr["method"] = report.method
    hdr.update(header or {})
    atomic_write(path, _csv_text(hdr, list(COLUMNS), report.records()))


def read_report(path):
    from .probe import ProbeReport, ProbeRow

    header, _, rows = _read_csv(path)
    out = [ProbeRow(*(float(x) for x in r[:5]), status=r[9]) for r in rows]
    return ProbeReport(tuple(out), header.get("method", "both"))


# -- manifests -----------------------------------------------------------------


def run_id(command, params, inputs):
    """Deterministic id of a run: same command, parameters and input contents give the same id."""
    blob = json.dumps(
        {
            "tool": f"trapwave {__version__}",
            "command": command,
            "params": params,
            "inputs": {str(k): file_digest(v) for k, v in sorted(inputs.items())},
        },
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(path, rid, command, params, inputs, outputs, config_hash=None, grid=None, started=None):
    manifest = {
        "run_id": rid,
        "tool_version": __version__,
        "command": command,
        "params": params,
        "config_hash": config_hash,
        "grid": grid,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "inputs": {str(k): {"path": str(v), "sha256": file_digest(v)} for k, v in inputs.items()},
        "outputs": {str(k): {"path": str(v), "sha256": file_digest(v)} for k, v in outputs.items()},
    }
    atomic_write(path, (json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n").encode())
    return manifest
