"""Run configuration: TOML file <-> validated dataclasses.

User-facing frequencies are f/2pi in MHz (keys ending in ``_mhz``) and times
are in ns; everything is converted to rad/ns on load.
"""

import hashlib
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerConfig
from .crosstalk import ConditionVector, CrosstalkParams
from .gradients import Problem
from .objectives import ObjectiveWeights
from .quantum import DeviceModel
from .trainers import TrainConfig
from .units import mhz_to_rad_per_ns, rad_per_ns_to_mhz

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


# Default file, in user units. Section -> ordered key -> value.
DEFAULTS = {
    "device": {
        "omega_1_mhz": 4380.0,
        "omega_2_mhz": 4614.0,
        "alpha_1_mhz": -240.0,
        "alpha_2_mhz": -243.0,
        "t1_1_ns": 70000.0,
        "t1_2_ns": 70000.0,
        "t2_1_ns": 80000.0,
        "t2_2_ns": 80000.0,
        "n_levels": 3,
        "gate_time_ns": 50.0,
        "n_steps": 50,
        "substeps": 8,
    },
    "crosstalk": {
        "r0": 0.05,
        "g_j_mhz": [0.0, 0.0, 2.0],
        "g_r": [0.0, 0.0, 0.2],
        "g_d1_mhz": [3.0, 0.0, -0.5],
        "g_d2_mhz": [0.0, 3.0, -0.5],
        "d_mat_mhz": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        "kappa_mhz": [0.0, 0.0, -20.0],
        "eps_1": 0.05,
        "eps_2": 0.05,
        "r_asymmetry": 0.0,
    },
    "controller": {
        "k_harmonics": 4,
        "hidden_sizes": [64, 64],
        "env_steepness": 40.0,
        "omega_max_mhz": 30.0,
        "delta_max_mhz": 30.0,
        "j_max_mhz": 15.0,
    },
    "objective": {
        "w_leak": 0.05,
        "w_smooth": 0.01,
        "aggregation": "mean",
        "cvar_alpha": 1.0,
    },
    "train": {
        "epochs": 400,
        "step_size": 3e-3,
        "step_floor": 1e-5,
        "clip_norm": 1.0,
        "pool_size": 24,
        "per_run": 3,
        "c_i_range": [0.0, 0.25],
        "c_q_range": [0.0, 0.25],
        "c_f_range": [-0.25, 0.0],
        "n_haar_train": 4,
    },
    "grape": {
        "epochs": 400,
        "step_size": 3e-2,
        "step_floor": 1e-5,
        "clip_norm": 1.0,
        "init_scale": 0.1,
    },
    "eval": {
        "n_states": 128,
        "conditions": [[0.0, 0.0, 0.0], [0.1, 0.1, -0.1], [0.25, 0.0, 0.0], [0.25, 0.25, -0.25]],
    },
    "scan": {
        "c_i": [0.0, 0.25, 6],
        "c_q": [0.0, 0.25, 6],
        "c_f_values": [0.0, -0.1, -0.25],
        "n_states": 128,
        "detuning_max_mhz": 3.0,
        "detuning_points": 21,
        "fidelity_threshold": 0.99,
    },
    "run": {
        "seed": 0,
        "out": "runs/default",
    },
}


@dataclass(frozen=True)
class GrapeSettings:
    train: TrainConfig = field(default_factory=lambda: TrainConfig(step_size=3e-2))
    init_scale: float = 0.1


@dataclass(frozen=True)
class EvalSpec:
    n_states: int = 128
    conditions: tuple = ()


@dataclass(frozen=True)
class ScanSpec:
    c_i: tuple = (0.0, 0.25, 6)
    c_q: tuple = (0.0, 0.25, 6)
    c_f_values: tuple = (0.0, -0.1, -0.25)
    n_states: int = 128
    detuning_max: float = mhz_to_rad_per_ns(3.0)
    detuning_points: int = 21
    fidelity_threshold: float = 0.99

    def axis(self, name):
        lo, hi, n = getattr(self, name)
        return np.linspace(lo, hi, int(n))

    def detuning_axis(self):
        return np.linspace(-self.detuning_max, self.detuning_max, self.detuning_points)


@dataclass(frozen=True)
class RunConfig:
    problem: Problem
    train: TrainConfig
    grape: GrapeSettings
    eval: EvalSpec
    scan: ScanSpec
    seed: int
    out: str
    raw: dict  # default-filled, user units; the source of the config hash

    @property
    def config_hash(self):
        return config_hash(self.raw)


def _merge(user):
    merged = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for sec, vals in user.items():
        if sec not in DEFAULTS:
            raise ConfigError(f"unknown section [{sec}]", field=sec)
        if not isinstance(vals, dict):
            raise ConfigError(f"{sec} must be a section", field=sec)
        for key, val in vals.items():
            if key not in DEFAULTS[sec]:
                raise ConfigError(f"unknown key {sec}.{key}", field=f"{sec}.{key}")
            merged[sec][key] = val
    return merged


def _num(raw, sec, key, kind=float):
    v = raw[sec][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{sec}.{key} must be a number", field=f"{sec}.{key}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{sec}.{key} must be an integer", field=f"{sec}.{key}")
        return int(v)
    return float(v)


def _vec(raw, sec, key, n=None):
    v = raw[sec][key]
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{sec}.{key} must be a numeric list", field=f"{sec}.{key}") from None
    if n is not None and arr.shape != (n,):
        raise ConfigError(f"{sec}.{key} must have {n} entries", field=f"{sec}.{key}")
    return arr


def _build(section, fn):
    """Run a constructor, turning its ValueError into a ConfigError naming the field."""
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as err:
        msg = str(err)
        name = msg.split()[0] if msg else section
        raise ConfigError(f"[{section}] {msg}", field=f"{section}.{name}") from None


def _train_config(raw, sec, seed):
    kw = dict(
        epochs=_num(raw, sec, "epochs", int),
        step_size=_num(raw, sec, "step_size"),
        step_floor=_num(raw, sec, "step_floor"),
        clip_norm=_num(raw, sec, "clip_norm"),
        seed=seed,
    )
    # condition sampling and the training ensemble are shared with [train]
    kw.update(
        pool_size=_num(raw, "train", "pool_size", int),
        per_run=_num(raw, "train", "per_run", int),
        c_i_range=tuple(_vec(raw, "train", "c_i_range", 2)),
        c_q_range=tuple(_vec(raw, "train", "c_q_range", 2)),
        c_f_range=tuple(_vec(raw, "train", "c_f_range", 2)),
        n_haar_train=_num(raw, "train", "n_haar_train", int),
    )
    return _build(sec, lambda: TrainConfig(**kw))


def from_dict(user, seed=None, out=None):
    """Validate a (partial) user-unit dict and build a :class:`RunConfig`."""
    raw = _merge(user)
    if seed is not None:
        raw["run"]["seed"] = int(seed)
    if out is not None:
        raw["run"]["out"] = str(out)
    seed = _num(raw, "run", "seed", int)
    if seed < 0:
        raise ConfigError("run.seed must be >= 0", field="run.seed")

    mhz = mhz_to_rad_per_ns
    model = _build(
        "device",
        lambda: DeviceModel(
            omega_1=mhz(_num(raw, "device", "omega_1_mhz")),
            omega_2=mhz(_num(raw, "device", "omega_2_mhz")),
            alpha_1=mhz(_num(raw, "device", "alpha_1_mhz")),
            alpha_2=mhz(_num(raw, "device", "alpha_2_mhz")),
            t1_1=_num(raw, "device", "t1_1_ns"),
            t1_2=_num(raw, "device", "t1_2_ns"),
            t2_1=_num(raw, "device", "t2_1_ns"),
            t2_2=_num(raw, "device", "t2_2_ns"),
            n_levels=_num(raw, "device", "n_levels", int),
            gate_time=_num(raw, "device", "gate_time_ns"),
            n_steps=_num(raw, "device", "n_steps", int),
        ),
    )
    substeps = _num(raw, "device", "substeps", int)
    if substeps < 1:
        raise ConfigError("device.substeps must be >= 1", field="device.substeps")

    if _num(raw, "crosstalk", "r_asymmetry") != 0.0:
        raise ConfigError("crosstalk.r_asymmetry: asymmetric drive mixing is reserved but not supported", field="crosstalk.r_asymmetry")
    d_mat = _vec(raw, "crosstalk", "d_mat_mhz")
    if d_mat.shape != (4, 3):
        raise ConfigError("crosstalk.d_mat_mhz must be 4x3", field="crosstalk.d_mat_mhz")
    xtalk = _build(
        "crosstalk",
        lambda: CrosstalkParams(
            r0=_num(raw, "crosstalk", "r0"),
            g_j=tuple(mhz(_vec(raw, "crosstalk", "g_j_mhz", 3))),
            g_r=tuple(_vec(raw, "crosstalk", "g_r", 3)),
            g_d1=tuple(mhz(_vec(raw, "crosstalk", "g_d1_mhz", 3))),
            g_d2=tuple(mhz(_vec(raw, "crosstalk", "g_d2_mhz", 3))),
            d_mat=tuple(map(tuple, mhz(d_mat))),
            kappa=tuple(mhz(_vec(raw, "crosstalk", "kappa_mhz", 3))),
            eps_1=_num(raw, "crosstalk", "eps_1"),
            eps_2=_num(raw, "crosstalk", "eps_2"),
        ),
    )

    hs = _vec(raw, "controller", "hidden_sizes", 2)
    ctrl = _build(
        "controller",
        lambda: ControllerConfig(
            k_harmonics=_num(raw, "controller", "k_harmonics", int),
            hidden_sizes=tuple(int(h) for h in hs),
            env_steepness=_num(raw, "controller", "env_steepness"),
            omega_max=mhz(_num(raw, "controller", "omega_max_mhz")),
            delta_max=mhz(_num(raw, "controller", "delta_max_mhz")),
            j_max=mhz(_num(raw, "controller", "j_max_mhz")),
        ),
    )

    weights = _build(
        "objective",
        lambda: ObjectiveWeights(
            w_leak=_num(raw, "objective", "w_leak"),
            w_smooth=_num(raw, "objective", "w_smooth"),
            mode=str(raw["objective"]["aggregation"]),
            alpha=_num(raw, "objective", "cvar_alpha"),
        ),
    )

    problem = Problem(model=model, xtalk=xtalk, controller=ctrl, weights=weights, substeps=substeps)
    train = _train_config(raw, "train", seed)
    grape = GrapeSettings(train=_train_config(raw, "grape", seed), init_scale=_num(raw, "grape", "init_scale"))
    if not grape.init_scale >= 0:
        raise ConfigError("grape.init_scale must be >= 0", field="grape.init_scale")

    n_eval = _num(raw, "eval", "n_states", int)
    if n_eval < 1:
        raise ConfigError("eval.n_states must be >= 1", field="eval.n_states")
    conds = _vec(raw, "eval", "conditions")
    if conds.ndim != 2 or conds.shape[1] != 3 or conds.shape[0] < 1:
        raise ConfigError("eval.conditions must be a list of [c_i, c_q, c_f]", field="eval.conditions")
    conditions = _build("eval", lambda: tuple(ConditionVector.from_array(c) for c in conds))

    scan = _scan_spec(raw)
    return RunConfig(problem, train, grape, EvalSpec(n_eval, conditions), scan, seed, raw["run"]["out"], raw)


def _scan_spec(raw):
    axes = {}
    for key in ("c_i", "c_q"):
        v = _vec(raw, "scan", key, 3)
        if not np.all(np.isfinite(v)) or v[2] != int(v[2]) or v[2] < 1:
            raise ConfigError(f"scan.{key} must be [min, max, count>=1]", field=f"scan.{key}")
        if v[0] > v[1] or v[0] < -1 or v[1] > 1:
            raise ConfigError(f"scan.{key} range must lie in [-1, 1]", field=f"scan.{key}")
        axes[key] = (float(v[0]), float(v[1]), int(v[2]))
    cf = _vec(raw, "scan", "c_f_values")
    if cf.ndim != 1 or cf.size < 1 or np.any(np.abs(cf) > 1):
        raise ConfigError("scan.c_f_values must be a nonempty list in [-1, 1]", field="scan.c_f_values")
    n_states = _num(raw, "scan", "n_states", int)
    if n_states < 1:
        raise ConfigError("scan.n_states must be >= 1", field="scan.n_states")
    dmax = _num(raw, "scan", "detuning_max_mhz")
    npts = _num(raw, "scan", "detuning_points", int)
    if not dmax >= 0 or npts < 1:
        raise ConfigError("detuning scan needs detuning_max_mhz >= 0 and detuning_points >= 1", field="scan.detuning_points")
    return ScanSpec(
        c_i=axes["c_i"],
        c_q=axes["c_q"],
        c_f_values=tuple(float(x) for x in cf),
        n_states=n_states,
        detuning_max=mhz_to_rad_per_ns(dmax),
        detuning_points=npts,
        fidelity_threshold=_num(raw, "scan", "fidelity_threshold"),
    )


def parse_text(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None)
        if line is None:
            import re

            m = re.search(r"line (\d+)", str(err))
            line = int(m.group(1)) if m else None
        raise ConfigError(f"parse error at line {line}: {err}", line=line) from None


def load_config(path, seed=None, out=None):
    """``path == "default"`` gives the built-in configuration."""
    if str(path) == "default":
        return from_dict({}, seed=seed, out=out)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}", field="config") from None
    return from_dict(parse_text(text), seed=seed, out=out)


def canonical_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return float(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def config_hash(raw):
    """sha256 over the default-filled config; integers and equal floats hash alike.

    The output directory is excluded: where results land does not change them.
    """
    semantic = {sec: {k: v for k, v in vals.items() if (sec, k) != ("run", "out")} for sec, vals in raw.items()}
    return hashlib.sha256(canonical_json(semantic).encode("utf-8")).hexdigest()


# --- writing ---------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to config")


def dump_text(raw):
    lines = []
    for sec, vals in raw.items():
        if lines:
            lines.append("")
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in vals.items())
    return "\n".join(lines) + "\n"


def default_config_text():
    return dump_text(DEFAULTS)


def mhz(x):
    """rad/ns -> f/2pi in MHz, for reporting."""
    return rad_per_ns_to_mhz(x)
