"""Synthetic schema-conformant CSV builders for the renderer tests."""

from __future__ import annotations

import numpy as np
import pytest


def timeseries_header(n: int, kinds=("conv", "comp")) -> list[str]:
    cols = ["t"]
    for block in ("vc_true_u", "vc_true_l", "duty_u", "duty_l"):
        cols += [f"{block}_{j:02d}" for j in range(1, n + 1)]
    for kind in kinds:
        for arm in ("u", "l"):
            cols += [f"vc_est_{kind}_{arm}_{j:02d}" for j in range(1, n + 1)]
    cols += ["i_u", "i_l", "v_arm_u", "v_arm_l", "i_out"]
    cols += [f"maxerr_{kind}" for kind in kinds]
    return cols


def write_timeseries_csv(path, k=60, n=4, kinds=("conv", "comp")):
    cols = timeseries_header(n, kinds)
    rng = np.random.default_rng(0)
    t = np.arange(1, k + 1) * 1e-4
    rows = []
    for i in range(k):
        vc = 1200.0 + 30.0 * np.sin(2 * np.pi * 50 * t[i] + np.arange(2 * n))
        duty = np.full(2 * n, 0.5)
        est = np.concatenate([vc + rng.normal(0, 2.0, 2 * n) for _ in kinds])
        scalars = [100.0, 95.0, 4800.0, 4810.0, 500.0 * np.sin(2 * np.pi * 50 * t[i])]
        maxerr = [5.0 / (j + 1) for j in range(len(kinds))]
        rows.append(np.concatenate(([t[i]], vc, duty, est, scalars, maxerr)))
    lines = [",".join(cols)]
    lines += [",".join("%.17e" % v for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sweep_csv(path, kinds=("conv", "comp")):
    cols = ["f_sample"] + [f"meanerr_{k}" for k in kinds] \
        + [f"peakerr_{k}" for k in kinds] + ["fault"]
    f = [1e3, 2e3, 5e3, 1e4, 2e4]
    conv = [50.0, 30.0, 12.0, 6.0, 3.0]
    comp = [20.0, 10.0, 5.0, 2.5, 1.5]
    lines = [",".join(cols)]
    for i in range(len(f)):
        lines.append(",".join(
            ["%.17e" % f[i], "%.17e" % conv[i], "%.17e" % comp[i],
             "%.17e" % (2 * conv[i]), "%.17e" % (2 * comp[i]), ""]))
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def ts_csv(tmp_path):
    return write_timeseries_csv(tmp_path / "run_timeseries.csv")


@pytest.fixture
def sweep_csv(tmp_path):
    return write_sweep_csv(tmp_path / "run_sweep_sampling.csv")
