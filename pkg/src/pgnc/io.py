"""Results tables, JSON summaries and binary checkpoints."""

import csv
import hashlib
import json
import math
import os
import struct
import tempfile

import numpy as np

from .controller import ControllerConfig, ControllerParams

SCHEMA_VERSION = 1
MAGIC = b"PGNCCKPT"
_PREFIX = struct.Struct("<8sIQ")  # magic, schema version, header length


def fmt_float(x):
    """17 significant digits: exact round trip for float64."""
    return format(float(x), ".17g")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_csv(path, header, rows):
    """RFC-4180 style CSV with a header row; returns the number of data rows."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([_cell(v) for v in row])
            n += 1
    return n


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _json(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        seq = list(v)
        if not seq:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in seq):
            return "[" + ", ".join(_json(x, indent, level + 1) for x in seq) + "]"
        return "[\n" + ",\n".join(pad + _json(x, indent, level + 1) for x in seq) + "\n" + end + "]"
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v) if math.isfinite(v) else "null"
    return json.dumps(str(v))


def dumps_json(obj, indent=2):
    """JSON text with floats written at 17 significant digits (non-finite -> null)."""
    return _json(obj, indent, 0) + "\n"


def write_summary(path, payload, config_hash):
    doc = {"schema_version": SCHEMA_VERSION, "config_hash": config_hash}
    doc.update(payload)
    _atomic_write(path, dumps_json(doc).encode("utf-8"))
    return path


def _atomic_write(path, data):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- checkpoints -----------------------------------------------------------

class CheckpointError(ValueError):
    pass


def controller_manifest(cfg):
    return {
        "k_harmonics": int(cfg.k_harmonics),
        "hidden_sizes": [int(h) for h in cfg.hidden_sizes],
        "env_steepness": float(cfg.env_steepness),
        "omega_max": float(cfg.omega_max),
        "delta_max": float(cfg.delta_max),
        "j_max": float(cfg.j_max),
    }


def history_digest(history):
    text = json.dumps(history or [], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_checkpoint(path, kind, values, layout, controller_cfg=None, history=None, config_hash=""):
    """Write ``values`` (flat float64) with a JSON header describing ``layout``.

    ``layout`` is a list of (name, shape) pairs whose sizes add up to the
    length of ``values``.
    """
    values = np.ascontiguousarray(values, dtype="<f8").ravel()
    total = sum(int(np.prod(s)) for _, s in layout)
    if total != values.size:
        raise CheckpointError(f"layout describes {total} values, got {values.size}")
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "layout": [[name, list(map(int, shape))] for name, shape in layout],
        "n_values": int(values.size),
        "controller": controller_manifest(controller_cfg) if controller_cfg is not None else None,
        "history_digest": history_digest(history),
        "config_hash": config_hash,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    _atomic_write(path, _PREFIX.pack(MAGIC, SCHEMA_VERSION, len(hbytes)) + hbytes + values.tobytes())
    return path


def load_checkpoint(path):
    """Return ``(header, values)``; raises :class:`CheckpointError` on any mismatch."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err.strerror}") from None
    if len(data) < _PREFIX.size:
        raise CheckpointError("truncated checkpoint")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != SCHEMA_VERSION:
        raise CheckpointError(f"checkpoint schema {version} != supported {SCHEMA_VERSION}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError("corrupt checkpoint header") from None
    body = data[start + hlen :]
    if len(body) != 8 * header["n_values"]:
        raise CheckpointError(f"checkpoint body holds {len(body) // 8} values, header says {header['n_values']}")
    return header, np.frombuffer(body, dtype="<f8").astype(float)


def save_controller(path, params, cfg, history=None, config_hash=""):
    params.check(cfg)
    return save_checkpoint(path, "pgnc", params.flatten(), cfg.layer_shapes(), cfg, history, config_hash)


def load_controller(path, cfg=None):
    """Load network weights; with ``cfg`` the stored architecture must match it."""
    header, values = load_checkpoint(path)
    if header["kind"] != "pgnc":
        raise CheckpointError(f"expected a pgnc checkpoint, found {header['kind']!r}")
    stored = header["controller"]
    stored_cfg = ControllerConfig(
        k_harmonics=stored["k_harmonics"],
        hidden_sizes=tuple(stored["hidden_sizes"]),
        env_steepness=stored["env_steepness"],
        omega_max=stored["omega_max"],
        delta_max=stored["delta_max"],
        j_max=stored["j_max"],
    )
    expected = [[n, list(s)] for n, s in stored_cfg.layer_shapes()]
    if header["layout"] != expected:
        raise CheckpointError("checkpoint layout does not match its controller manifest")
    if cfg is not None and controller_manifest(cfg) != stored:
        raise CheckpointError(f"checkpoint controller {stored} differs from configured {controller_manifest(cfg)}")
    return ControllerParams.unflatten(values, stored_cfg), stored_cfg, header


def save_grape(path, params, history=None, config_hash=""):
    return save_checkpoint(path, "grape", params.nodes, [("nodes", params.nodes.shape)], None, history, config_hash)


def load_grape(path):
    from .trainers import GrapeParams

    header, values = load_checkpoint(path)
    if header["kind"] != "grape":
        raise CheckpointError(f"expected a grape checkpoint, found {header['kind']!r}")
    (name, shape), = header["layout"]
    return GrapeParams(values.reshape(shape)), header
