"""Experiment configurations, parameter sweeps and tabular output.

A sweep transpiles the code once per platform (with the platform's calibrated
noise model) and then re-simulates that circuit at every grid point under a
uniform noise model shared by both platforms:

* ``t2``: damping only, ``t1 = alpha * t2``, every noisy gate lasting
  ``gate_time``, no depolarizing or SPAM error;
* ``depol``: no damping channels at all, the given ``p_depol`` on every gate;
* ``none``: the platform's own calibration, one row per platform.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .calibration import build_noise_model, load_device, parse_yaml, uniform_noise_model
from .codes import (
    KINDS,
    PAULI_STATES,
    RECOVERIES,
    CodeBackend,
    CodeSpec,
    average_over_states,
    derived_seed,
    evaluate,
    parse_error,
)
from .errors import ConfigurationError, DeviceFileError
from .simulator import ExecutionOptions
from .transpiler import score_layout

COLUMNS = ("sweep_var", "value", "alpha", "platform", "logical_error_rate", "p_av", "cnot_count", "total_ops")
SWEEP_TYPES = ("none", "t2", "depol")
FORMATS = ("csv", "json")
AVERAGE = "average"
DEFAULT_DEVICES = ("ibm-falcon-27", "nv-center-5")
DEFAULT_T2 = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)
DEFAULT_ALPHAS = (0.5, 1.0, 10.0)
DEFAULT_DEPOL = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05)


@dataclass(frozen=True)
class Sweep:
    type: str = "none"
    values: tuple = ()
    alphas: tuple = (1.0,)

    def points(self) -> list[tuple]:
        """Grid points as ``(sweep_var, value, alpha)``."""
        if self.type == "none":
            return [("none", None, None)]
        if self.type == "t2":
            return [("t2", v, a) for a in self.alphas for v in self.values]
        return [("p_depol", v, None) for v in self.values]


@dataclass(frozen=True)
class ExperimentConfig:
    devices: tuple = DEFAULT_DEVICES
    kind: str = "bit-flip"
    recovery: str = "post-processing"
    input_state: object = "0"  # a Pauli state label or "average" over all six
    error: object = "random"
    random_includes_none: bool = False
    sweeps: tuple = (Sweep(),)
    gate_time: float = 0.001
    prep_spam: bool = True
    shots: int = 0
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    workers: int = 1


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    value: float | None
    alpha: float | None
    platform: str
    logical_error_rate: float
    p_av: float
    cnot_count: int
    total_ops: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass(frozen=True)
class SweepResult:
    rows: tuple = ()
    config: ExperimentConfig = field(default_factory=ExperimentConfig)

    def select(self, **match) -> list[SweepRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]


# ----------------------------------------------------------------------------
# Config documents

_CONFIG_KEYS = {
    "device", "devices", "code", "sweep", "sweeps", "gate_time", "prep_spam",
    "shots", "seed", "output", "format", "workers",
}
_CODE_KEYS = {"kind", "recovery", "input_state", "error", "random_includes_none"}
_SWEEP_KEYS = {"type", "values", "alphas"}


def _positive_list(raw, where: str, problems: list) -> tuple:
    if not isinstance(raw, (list, tuple)) or not raw:
        problems.append(f"{where}: expected a non-empty list of numbers")
        return ()
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            problems.append(f"{where}[{i}]: expected a positive number, got {v!r}")
        else:
            out.append(float(v))
    return tuple(out)


def _sweep_from_dict(doc, where: str, problems: list) -> Sweep | None:
    if not isinstance(doc, dict):
        problems.append(f"{where}: expected a mapping")
        return None
    for k in sorted(set(doc) - _SWEEP_KEYS):
        problems.append(f"{where}.{k}: unknown key")
    kind = doc.get("type", "none")
    if kind not in SWEEP_TYPES:
        problems.append(f"{where}.type: expected one of {SWEEP_TYPES}, got {kind!r}")
        return None
    if kind == "none":
        return Sweep()
    default = DEFAULT_T2 if kind == "t2" else DEFAULT_DEPOL
    values = _positive_list(doc.get("values", list(default)), f"{where}.values", problems)
    alphas = (1.0,)
    if kind == "t2":
        alphas = _positive_list(doc.get("alphas", list(DEFAULT_ALPHAS)), f"{where}.alphas", problems)
    elif "alphas" in doc:
        problems.append(f"{where}.alphas: only meaningful for a t2 sweep")
    return Sweep(kind, values, alphas)


def config_from_dict(doc) -> ExperimentConfig:
    """Validate an experiment document; every problem is reported with its field name."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise DeviceFileError("experiment config must be a mapping")
    problems: list[str] = []
    for k in sorted(set(doc) - _CONFIG_KEYS):
        problems.append(f"{k}: unknown key")
    cfg: dict = {}

    if "device" in doc and "devices" in doc:
        problems.append("device: give either 'device' or 'devices', not both")
    devices = doc.get("devices", doc.get("device", list(DEFAULT_DEVICES)))
    if isinstance(devices, str):
        devices = [devices]
    if not isinstance(devices, list) or not devices or not all(isinstance(d, str) for d in devices):
        problems.append("devices: expected a device name/path or a list of them")
    else:
        cfg["devices"] = tuple(devices)

    code = doc.get("code", {}) or {}
    if not isinstance(code, dict):
        problems.append("code: expected a mapping")
        code = {}
    for k in sorted(set(code) - _CODE_KEYS):
        problems.append(f"code.{k}: unknown key")
    kind = code.get("kind", "bit-flip")
    if kind not in KINDS:
        problems.append(f"code.kind: expected one of {KINDS}, got {kind!r}")
    recovery = code.get("recovery", "post-processing")
    if recovery not in RECOVERIES:
        problems.append(f"code.recovery: expected one of {RECOVERIES}, got {recovery!r}")
    state = code.get("input_state", "0")
    if isinstance(state, list):
        state = tuple(complex(x) for x in state)
    elif state not in PAULI_STATES + (AVERAGE,):
        problems.append(f"code.input_state: expected one of {PAULI_STATES + (AVERAGE,)} or [alpha, beta]")
    error = code.get("error", "random")
    if kind in KINDS:
        try:
            parse_error(error, kind)
        except Exception as exc:
            problems.append(f"code.error: {exc}")
    cfg.update(kind=kind, recovery=recovery, input_state=state, error=error)
    cfg["random_includes_none"] = bool(code.get("random_includes_none", False))

    if "sweep" in doc and "sweeps" in doc:
        problems.append("sweep: give either 'sweep' or 'sweeps', not both")
    raw = doc.get("sweeps", doc.get("sweep", {"type": "none"}))
    raw = raw if isinstance(raw, list) else [raw]
    key = "sweeps" if "sweeps" in doc else "sweep"
    sweeps = [_sweep_from_dict(s, f"{key}[{i}]" if key == "sweeps" else key, problems) for i, s in enumerate(raw)]
    cfg["sweeps"] = tuple(s for s in sweeps if s is not None)

    gate_time = doc.get("gate_time", 0.001)
    if isinstance(gate_time, bool) or not isinstance(gate_time, (int, float)) or gate_time < 0:
        problems.append(f"gate_time: expected a non-negative number, got {gate_time!r}")
    else:
        cfg["gate_time"] = float(gate_time)
    for name, default, low in (("shots", 0, 0), ("seed", 0, 0), ("workers", 1, 1)):
        v = doc.get(name, default)
        if isinstance(v, bool) or not isinstance(v, int) or v < low:
            problems.append(f"{name}: expected an integer >= {low}, got {v!r}")
        else:
            cfg[name] = v
    cfg["prep_spam"] = bool(doc.get("prep_spam", True))
    fmt = doc.get("format", "csv")
    if fmt not in FORMATS:
        problems.append(f"format: expected one of {FORMATS}, got {fmt!r}")
    else:
        cfg["format"] = fmt
    out = doc.get("output")
    if out is not None and not isinstance(out, str):
        problems.append(f"output: expected a path, got {out!r}")
    cfg["output"] = out
    if problems:
        raise DeviceFileError(problems)
    return ExperimentConfig(**cfg)


def load_config(source) -> ExperimentConfig:
    """Read an experiment config from a path or YAML text."""
    path = Path(source) if not isinstance(source, str) or "\n" not in source else None
    if path is not None and not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text() if path is not None else source
    try:
        doc = parse_yaml(text)
    except DeviceFileError as exc:
        raise DeviceFileError(f"{path or 'config'}: {exc}") from exc
    return config_from_dict(doc)


# ----------------------------------------------------------------------------
# Running


def _noise_for(device, sweep_var: str, value, alpha, gate_time: float):
    if sweep_var == "t2":
        return uniform_noise_model(device, t1=alpha * value, t2=value, gate_time=gate_time)
    if sweep_var == "p_depol":
        return uniform_noise_model(device, p_depol=value)
    return build_noise_model(device)


def _rate(config: ExperimentConfig, backend: CodeBackend, noise, seed: int) -> float:
    opts = ExecutionOptions(config.shots, seed, noise, config.prep_spam)
    if config.input_state == AVERAGE:
        return average_over_states(
            config.kind, config.recovery, backend, error=config.error, opts=opts,
            random_includes_none=config.random_includes_none,
        ).logical_error_rate
    spec = CodeSpec(config.kind, config.recovery, config.input_state, config.error, config.random_includes_none)
    return evaluate(spec, backend, opts).logical_error_rate


def run_experiment(config: ExperimentConfig) -> SweepResult:
    """Evaluate every grid point of every sweep on every platform.

    Rows are ordered by sweep, then grid point, then platform, whatever the
    number of workers.
    """
    backends = []
    for name in config.devices:
        device = load_device(name)
        backends.append(CodeBackend.build(config.kind, config.recovery, device, build_noise_model(device)))
    tasks = []
    for sweep in config.sweeps:
        for point in sweep.points():
            for backend in backends:
                tasks.append((point, backend))

    def work(index_task):
        i, ((var, value, alpha), backend) = index_task
        noise = _noise_for(backend.device, var, value, alpha, config.gate_time)
        rate = _rate(config, backend, noise, derived_seed(config.seed, i))
        tr = backend.transpiled
        return SweepRow(
            var, value, alpha, backend.device.name, rate,
            score_layout(tr.circuit, noise), tr.cnot_count, tr.total_ops,
        )

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            rows = list(pool.map(work, enumerate(tasks)))
    else:
        rows = [work(t) for t in enumerate(tasks)]
    return SweepResult(tuple(rows), config)


# ----------------------------------------------------------------------------
# Output


def _cell(v):
    return "" if v is None else v


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in result.rows:
        w.writerow([_cell(v) if not isinstance(v, float) else repr(v) for v in row.as_tuple()])
    return buf.getvalue()


def to_json(result: SweepResult) -> str:
    rows = [dict(zip(COLUMNS, row.as_tuple())) for row in result.rows]
    return json.dumps({"columns": list(COLUMNS), "rows": rows}, indent=2) + "\n"


def emit(result: SweepResult, fmt: str = "csv", path=None) -> str:
    """Serialise ``result``; writes to ``path`` when given and returns the text."""
    if fmt not in FORMATS:
        raise ConfigurationError(f"unknown output format {fmt!r}; expected one of {FORMATS}")
    text = to_csv(result) if fmt == "csv" else to_json(result)
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            raise ConfigurationError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``config`` with the non-``None`` entries of ``changes`` applied."""
    return replace(config, **{k: v for k, v in changes.items() if v is not None})


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``fig7``, ``fig9``)."""
    p = Path(__file__).parent / "configs" / f"{Path(name).stem}.yaml"
    if not p.is_file():
        raise ConfigurationError(f"no bundled config named {name!r}")
    return p
