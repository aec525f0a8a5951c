"""Column-contract access to the workbench CSV files.

Time-series files carry `t`, per-module blocks `vc_true_<arm>_NN`,
`duty_<arm>_NN` and `vc_est_<kind>_<arm>_NN`, scalar series (`i_u`, `i_l`,
`v_arm_u`, `v_arm_l`, `i_out`) and `maxerr_<kind>` profiles. Sweep tables
carry the swept parameter in the first column plus `meanerr_<kind>` /
`peakerr_<kind>` columns. Kind tokens are `conv` and `comp`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

KIND_LABELS = {"conv": "conventional", "comp": "proposed"}


class SchemaError(ValueError):
    """The CSV does not carry the columns the requested plot needs."""


def _read_csv(path: str | Path) -> pd.DataFrame:
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"input file not found: {p}")
    try:
        return pd.read_csv(p)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{p}: not a CSV file (no header row)") from exc


def _module_block(df: pd.DataFrame, prefix: str) -> np.ndarray | None:
    pat = re.compile(rf"^{re.escape(prefix)}_(\d+)$")
    cols = sorted((int(m.group(1)), c) for c in df.columns
                  if (m := pat.match(c)))
    if not cols:
        return None
    return df[[c for _i, c in cols]].to_numpy()


@dataclass
class TimeSeries:
    """Parsed time-series CSV with module blocks resolved."""

    t: np.ndarray
    vc_true: dict[str, np.ndarray]  # arm -> (K, N)
    vc_est: dict[str, dict[str, np.ndarray]]  # kind -> arm -> (K, N)
    maxerr: dict[str, np.ndarray]  # kind -> (K,)
    scalars: dict[str, np.ndarray]
    n_modules: int

    @classmethod
    def load(cls, path: str | Path) -> "TimeSeries":
        df = _read_csv(path)
        if "t" not in df.columns:
            raise SchemaError(f"{path}: missing column 't'")
        vc_true = {}
        for arm in ("u", "l"):
            block = _module_block(df, f"vc_true_{arm}")
            if block is None:
                raise SchemaError(f"{path}: missing columns 'vc_true_{arm}_*'")
            vc_true[arm] = block
        vc_est: dict[str, dict[str, np.ndarray]] = {}
        maxerr: dict[str, np.ndarray] = {}
        for kind in KIND_LABELS:
            per_arm = {}
            for arm in ("u", "l"):
                block = _module_block(df, f"vc_est_{kind}_{arm}")
                if block is not None:
                    per_arm[arm] = block
            if per_arm:
                vc_est[kind] = per_arm
            if f"maxerr_{kind}" in df.columns:
                maxerr[kind] = df[f"maxerr_{kind}"].to_numpy()
        scalars = {c: df[c].to_numpy() for c in
                   ("i_u", "i_l", "v_arm_u", "v_arm_l", "i_out")
                   if c in df.columns}
        return cls(t=df["t"].to_numpy(), vc_true=vc_true, vc_est=vc_est,
                   maxerr=maxerr, scalars=scalars,
                   n_modules=vc_true["u"].shape[1])

    def require_scalars(self, names: tuple[str, ...], path="") -> None:
        missing = [n for n in names if n not in self.scalars]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")


@dataclass
class SweepTable:
    """Parsed sweep CSV: swept parameter plus per-kind error curves."""

    param_name: str
    param: np.ndarray
    mean_err: dict[str, np.ndarray]
    peak_err: dict[str, np.ndarray]

    @classmethod
    def load(cls, path: str | Path) -> "SweepTable":
        df = _read_csv(path)
        if df.columns.size == 0:
            raise SchemaError(f"{path}: empty header")
        param_name = df.columns[0]
        mean_err = {}
        peak_err = {}
        for kind in KIND_LABELS:
            if f"meanerr_{kind}" in df.columns:
                mean_err[kind] = df[f"meanerr_{kind}"].to_numpy(dtype=float)
            if f"peakerr_{kind}" in df.columns:
                peak_err[kind] = df[f"peakerr_{kind}"].to_numpy(dtype=float)
        if not mean_err:
            raise SchemaError(f"{path}: missing columns 'meanerr_conv'/'meanerr_comp'")
        return cls(param_name=param_name,
                   param=df[param_name].to_numpy(dtype=float),
                   mean_err=mean_err, peak_err=peak_err)


def load_manifest(csv_path: str | Path) -> dict | None:
    """Best-effort read of the manifest JSON sitting beside a CSV."""
    p = Path(csv_path)
    stem = p.name
    for suffix in ("_timeseries.csv", ".csv"):
        if stem.endswith(suffix):
            candidate = p.with_name(stem[:-len(suffix)] + "_manifest.json")
            if candidate.is_file():
                try:
                    return json.loads(candidate.read_text())
                except json.JSONDecodeError:
                    return None
    return None
