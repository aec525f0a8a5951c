"""Scenario files, CSV/manifest output.

Config files are flat text, one `key = value` per line, `#` comments, dotted
keys (diff-friendly for sweep studies). All values are SI base units. Unknown
keys are rejected; missing required keys are reported together.

Time-series CSV schema (fixed contract consumed by the figures tool):
  t,
  vc_true_u_01..N, vc_true_l_01..N,
  duty_u_01..N, duty_l_01..N,
  per kind: vc_est_<kind>_u_01..N, vc_est_<kind>_l_01..N,
  i_u, i_l, v_arm_u, v_arm_l, i_out,
  per kind: maxerr_<kind>
with kind tokens `conv`/`comp`, '.' decimal point, ',' separator, '\n' line
ends, and full-precision scientific notation. A JSON manifest sits beside
every CSV with keys: version, seed, config, metrics, files.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConverterConfig, ToleranceSpec
from .errors import ConfigError
from .harness import KIND_TOKENS, RunResult, Scenario, SweepRow

__all__ = [
    "parse_config",
    "parse_config_text",
    "write_timeseries",
    "write_sweep_table",
    "write_manifest",
    "read_timeseries",
    "RunManifest",
]

_FMT = "%.17e"


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_pairs(raw: str) -> tuple[tuple[int, float], ...]:
    """`1:0,8:5` -> ((1, 0.0), (8, 5.0)); empty string -> ()."""
    raw = raw.strip()
    if not raw:
        return ()
    out = []
    for item in raw.split(","):
        left, _, right = item.partition(":")
        out.append((int(left.strip()), float(right.strip())))
    return tuple(out)


# key -> (converter field | handler, type, unit, required)
_CONVERTER_KEYS = {
    "converter.n_modules_per_arm": (int, "modules per arm", True),
    "converter.v_dc": (float, "V", True),
    "converter.v_sm_rated": (float, "V", True),
    "converter.c_nominal": (float, "F", True),
    "converter.r_cap": (float, "Ohm", True),
    "converter.l_arm": (float, "H", True),
    "converter.r_arm": (float, "Ohm", True),
    "converter.l_clamp": (float, "H", True),
    "converter.r_clamp": (float, "Ohm", True),
    "converter.v_fd": (float, "V", False),
    "converter.f_carrier": (float, "Hz", True),
    "converter.f_out": (float, "Hz", True),
    "converter.m_a": (float, "dimensionless in [0,1]", True),
    "converter.delta_a": (float, "dimensionless >= 0", False),
    "converter.sign_adaptive": (_parse_bool, "boolean", False),
    "converter.p_rated": (float, "W", True),
    "converter.l_load": (float, "H", True),
    "converter.f_sample": (float, "Hz", True),
    "converter.dt_sim": (float, "s", True),
    "converter.sigma_v": (float, "V", False),
    "converter.sigma_i": (float, "A", False),
    "converter.duration": (float, "s", True),
    "converter.rng_seed": (int, "integer", True),
    "converter.r_self_nominal": (float, "Ohm", False),
}

_OTHER_KEYS = {
    "scenario.name": (str, "identifier", True),
    "scenario.kinds": (str, "comma list of conv,comp", False),
    "tolerance.spread_fraction": (float, "fraction in [0,1)", False),
    "tolerance.distribution": (str, "truncated-normal | uniform", False),
    "tolerance.forced_ranking": (_parse_pairs, "module:rank pairs", False),
    "tolerance.discharge_boost": (_parse_pairs, "module:multiplier pairs", False),
    "estimator.q_process_std": (float, "V per sample", False),
    "estimator.r_meas": (float, "V^2", False),
    "estimator.p0_std": (float, "V", False),
    "estimator.x0": (float, "V", False),
    "estimator.b_threshold_vfd": (_parse_bool, "boolean", False),
}

_ALL_KEYS = {**_CONVERTER_KEYS, **_OTHER_KEYS}


def parse_config_text(text: str, source: str = "<string>") -> Scenario:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, eq, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not eq:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        conv, unit, _req = _ALL_KEYS[key]
        try:
            values[key] = conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"{source}:{lineno}: invalid value for {key} (expected {unit}), "
                f"received {raw!r}: {exc}") from exc

    missing = [k for k, (_c, _u, req) in _ALL_KEYS.items()
               if req and k not in values]
    if missing:
        listing = ", ".join(f"{k} [{_ALL_KEYS[k][1]}]" for k in missing)
        raise ConfigError(f"{source}: missing required keys: {listing}")

    cfg_kwargs = {}
    for key, (_c, _u, _r) in _CONVERTER_KEYS.items():
        if key in values:
            cfg_kwargs[key.split(".", 1)[1]] = values[key]
    try:
        cfg = ConverterConfig(**cfg_kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    tol_kwargs = {}
    for key in ("tolerance.spread_fraction", "tolerance.distribution",
                "tolerance.forced_ranking", "tolerance.discharge_boost"):
        if key in values:
            tol_kwargs[key.split(".", 1)[1]] = values[key]
    if "forced_ranking" in tol_kwargs:
        tol_kwargs["forced_ranking"] = tuple(
            (m, int(r)) for m, r in tol_kwargs["forced_ranking"])
    try:
        tol = ToleranceSpec(**tol_kwargs)
        tol.validate_against(cfg.n_modules_per_arm)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    kinds = tuple(
        k.strip() for k in str(values.get("scenario.kinds", "conv,comp")).split(","))
    est_overrides = {}
    for key in ("estimator.q_process_std", "estimator.r_meas",
                "estimator.p0_std", "estimator.x0", "estimator.b_threshold_vfd"):
        if key in values:
            est_overrides[key.split(".", 1)[1]] = values[key]

    scenario = Scenario(
        name=str(values["scenario.name"]), cfg=cfg, tolerance=tol,
        kind_list=kinds, estimator_overrides=est_overrides)
    scenario.kinds()  # validate kind tokens now
    return scenario


def parse_config(path: str | os.PathLike) -> Scenario:
    """Parse a scenario file, validating every field against the model invariants."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), source=str(p))


def _kind_tokens(result: RunResult) -> list[tuple[str, str]]:
    order = [k for k in ("conventional", "compensated") if k in result.kinds]
    return [(k, KIND_TOKENS[k]) for k in order]


def timeseries_header(n: int, kinds_full: list[str]) -> list[str]:
    tokens = [KIND_TOKENS[k] for k in kinds_full]
    cols = ["t"]
    for block in ("vc_true_u", "vc_true_l", "duty_u", "duty_l"):
        cols += [f"{block}_{j:02d}" for j in range(1, n + 1)]
    for tok in tokens:
        for arm in ("u", "l"):
            cols += [f"vc_est_{tok}_{arm}_{j:02d}" for j in range(1, n + 1)]
    cols += ["i_u", "i_l", "v_arm_u", "v_arm_l", "i_out"]
    cols += [f"maxerr_{tok}" for tok in tokens]
    return cols


def write_timeseries(result: RunResult, path: str | os.PathLike) -> None:
    """Write the run's sample-grid series as CSV (see module docstring schema)."""
    n = result.cfg.n_modules_per_arm
    pairs = _kind_tokens(result)
    cols = timeseries_header(n, [k for k, _t in pairs])
    blocks = [result.t[:, None], result.vc_true_u, result.vc_true_l,
              result.duty_u, result.duty_l]
    for kind, _tok in pairs:
        blocks += [result.est_u[kind], result.est_l[kind]]
    blocks += [result.i_u[:, None], result.i_l[:, None],
               result.v_arm_u[:, None], result.v_arm_l[:, None],
               result.i_out[:, None]]
    blocks += [result.max_err[kind][:, None] for kind, _tok in pairs]
    data = np.hstack(blocks) if result.t.size else np.empty((0, len(cols)))
    if data.shape[1] != len(cols):
        raise ConfigError(
            f"internal column mismatch: {data.shape[1]} != {len(cols)}")
    _write_csv(path, cols, data)


def write_sweep_table(rows: list[SweepRow], param_name: str,
                      path: str | os.PathLike) -> None:
    """Sweep CSV: <param>, meanerr_<kind>..., peakerr_<kind>..., fault."""
    kinds = []
    for row in rows:
        for k in row.mean_err:
            if k not in kinds:
                kinds.append(k)
    tokens = [KIND_TOKENS[k] for k in kinds]
    cols = ([param_name] + [f"meanerr_{t}" for t in tokens]
            + [f"peakerr_{t}" for t in tokens] + ["fault"])
    lines = [",".join(cols)]
    for row in rows:
        vals = [_FMT % row.param[param_name]]
        vals += [(_FMT % row.mean_err[k]) if k in row.mean_err else "nan"
                 for k in kinds]
        vals += [(_FMT % row.peak_err[k]) if k in row.peak_err else "nan"
                 for k in kinds]
        vals.append("" if row.fault is None else row.fault.replace(",", ";"))
        lines.append(",".join(vals))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_csv(path, cols: list[str], data: np.ndarray) -> None:
    lines = [",".join(cols)]
    for row in data:
        lines.append(",".join(_FMT % v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text: str) -> None:
    p = Path(path)
    tmp = p.with_suffix(p.suffix + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, p)
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc}") from exc


def read_timeseries(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Round-trip reader for the time-series CSV: (column names, data array)."""
    p = Path(path)
    with p.open() as fh:
        header = fh.readline().strip()
    cols = header.split(",")
    data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(cols)))
    return cols, data


@dataclasses.dataclass
class RunManifest:
    """Reproducibility sidecar written next to every output file set."""

    version: str
    seed: int
    config: dict
    metrics: dict
    files: list[str]
    started_at: str = ""
    finished_at: str = ""

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def _config_as_dict(cfg: ConverterConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}


def write_manifest(result: RunResult, files: list[str],
                   path: str | os.PathLike,
                   started_at: float | None = None) -> RunManifest:
    metrics = {}
    for kind, m in result.metrics.items():
        metrics[KIND_TOKENS[kind]] = {
            "mean_max_err_v": m.mean_max_err,
            "peak_max_err_v": m.peak_max_err,
            "mae_v": m.mae,
            "accuracy": m.accuracy(result.cfg.v_sm_rated),
        }
    if result.improvement is not None:
        metrics["improvement_ratio"] = result.improvement
    manifest = RunManifest(
        version=__version__,
        seed=result.seed,
        config=_config_as_dict(result.cfg),
        metrics=metrics,
        files=[str(f) for f in files],
        started_at=_iso(started_at) if started_at else "",
        finished_at=_iso(time.time()))
    _atomic_write(path, manifest.to_json() + "\n")
    return manifest


def _iso(ts: float) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(ts))
