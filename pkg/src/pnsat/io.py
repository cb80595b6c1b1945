"""Artifact writers: energy log, snapshot CSVs, metadata, plot script."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mc import McResult
from .solver import RunResult


def _write_snapshot_csv(path: Path, nodes, values: np.ndarray, extra=None) -> None:
    ndim = len(nodes)
    header = ("x,u00" if ndim == 1 else "x,z,u00") + ("," + extra[0] if extra else "")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        if ndim == 1:
            cols = [nodes[0], values] + ([extra[1]] if extra else [])
            for row in zip(*cols):
                fh.write(",".join(f"{float(v)!r}" for v in row) + "\n")
        else:
            xg, zg = np.meshgrid(nodes[0], nodes[1], indexing="ij")
            cols = [xg.ravel(), zg.ravel(), values.ravel()]
            if extra:
                cols.append(extra[1].ravel())
            for row in zip(*cols):
                fh.write(",".join(f"{float(v)!r}" for v in row) + "\n")


def read_snapshot_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data


def snapshot_label(snap) -> str:
    if snap.energy is not None:
        return f"eps{snap.energy:.6g}"
    return f"t{snap.time:.6g}"


def write_run(result: RunResult, outdir) -> dict:
    """Write energy.csv, snapshot CSVs, metadata.json and a plot script."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    log = result.log
    bound = log.bound
    with open(outdir / "energy.csv", "w") as fh:
        fh.write("t,E,bound\n")
        for t, e, b in zip(log.times, log.energies, bound):
            fh.write(f"{float(t)!r},{float(e)!r},{float(b)!r}\n")
    snap_files = []
    for i, snap in enumerate(result.snapshots):
        name = f"snapshot_{i:03d}.csv"
        _write_snapshot_csv(outdir / name, snap.nodes, snap.u00)
        snap_files.append(
            {"file": name, "time": snap.time, "energy": snap.energy, "label": snapshot_label(snap)}
        )
    meta = dict(result.metadata)
    meta["snapshots"] = snap_files
    with open(outdir / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    with open(outdir / "plot_run.py", "w") as fh:
        fh.write(_plot_script(result.scenario.ndim, snap_files))
    return meta


def write_mc(result: McResult, outdir) -> dict:
    """Write tally CSVs (solver snapshot format) plus stderr companions."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    snap_files = []
    for i, snap in enumerate(result.snapshots):
        name = f"tally_{i:03d}.csv"
        _write_snapshot_csv(outdir / name, result.centers, snap.u00)
        _write_snapshot_csv(
            outdir / f"tally_{i:03d}_stderr.csv", result.centers, snap.u00, ("stderr", snap.stderr)
        )
        snap_files.append(
            {"file": name, "time": snap.time, "energy": snap.energy}
        )
    meta = {
        "scenario": result.scenario.to_dict(),
        "n_particles": result.n_particles,
        "seed": result.seed,
        "tallies": snap_files,
        **result.meta,
    }
    with open(outdir / "mc_metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    return meta


def diff_against_run(mc_result: McResult, run_dir) -> dict:
    """Compare tallies with a solver run's snapshots on the shared cell centers.

    Solver snapshots live on the even grid (boundaries + midpoints); the
    tally bins are centred on the interior even nodes, so the comparison is
    node-exact after stripping the two boundary entries.
    """
    run_dir = Path(run_dir)
    with open(run_dir / "metadata.json") as fh:
        meta = json.load(fh)
    entries = []
    for i, snap in enumerate(mc_result.snapshots):
        match = None
        for rec in meta.get("snapshots", []):
            if abs(rec["time"] - snap.time) < 1e-9:
                match = rec
                break
        if match is None:
            continue
        data = read_snapshot_csv(run_dir / match["file"])
        ndim = mc_result.scenario.ndim
        if ndim == 1:
            shape = (mc_result.scenario.cells[0] + 2,)
        else:
            shape = (mc_result.scenario.cells[0] + 2, mc_result.scenario.cells[1] + 2)
        solver_u = np.asarray(data["u00"]).reshape(shape)
        interior = solver_u[tuple(slice(1, -1) for _ in range(ndim))]
        diff = interior - snap.u00
        scale = float(np.abs(interior).max()) or 1.0
        entries.append(
            {
                "time": snap.time,
                "energy": snap.energy,
                "max_abs_diff": float(np.abs(diff).max()),
                "max_rel_diff": float(np.abs(diff).max() / scale),
                "rms_diff": float(np.sqrt(np.mean(diff**2))),
                "mc_stderr_max": float(snap.stderr.max()),
            }
        )
    return {"run_dir": str(run_dir), "snapshots": entries}


def _plot_script(ndim: int, snap_files) -> str:
    """Matplotlib script reproducing the figure layout from the CSV artifacts."""
    files = json.dumps([rec["file"] for rec in snap_files])
    labels = json.dumps([rec["label"] for rec in snap_files])
    body_1d = '''
for fname, label in zip(SNAPSHOTS, LABELS):
    data = np.genfromtxt(here / fname, delimiter=",", names=True)
    ax1.plot(data["x"], data["u00"], label=label)
ax1.set_xlabel("x"); ax1.set_ylabel("u00"); ax1.legend()
'''
    body_2d = '''
n = len(SNAPSHOTS)
fig2, axes = plt.subplots(1, max(n, 1), figsize=(4 * max(n, 1), 3.5))
axes = np.atleast_1d(axes)
for ax, fname, label in zip(axes, SNAPSHOTS, LABELS):
    data = np.genfromtxt(here / fname, delimiter=",", names=True)
    x = np.unique(data["x"]); z = np.unique(data["z"])
    u = data["u00"].reshape(x.size, z.size)
    pc = ax.pcolormesh(x, z, u.T, shading="nearest")
    fig2.colorbar(pc, ax=ax)
    ax.set_title(label); ax.set_xlabel("x"); ax.set_ylabel("z")
fig2.tight_layout(); fig2.savefig(here / "snapshots.png", dpi=150)
for fname, label in zip(SNAPSHOTS, LABELS):
    data = np.genfromtxt(here / fname, delimiter=",", names=True)
    x = np.unique(data["x"]); z = np.unique(data["z"])
    u = data["u00"].reshape(x.size, z.size)
    ax1.plot(z, u[np.argmin(np.abs(x)), :], label=label)
ax1.set_xlabel("z"); ax1.set_ylabel("u00 at x=0"); ax1.legend()
'''
    return f'''"""Generated plotting script: density snapshots and the energy curve."""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).parent
SNAPSHOTS = {files}
LABELS = {labels}

fig1, ax1 = plt.subplots(figsize=(5, 3.5))
{body_1d if ndim == 1 else body_2d}
fig1.tight_layout(); fig1.savefig(here / "density.png", dpi=150)

log = np.genfromtxt(here / "energy.csv", delimiter=",", names=True)
fig3, ax3 = plt.subplots(figsize=(5, 3.5))
ax3.plot(log["t"], log["E"], label="energy")
if np.all(np.isfinite(log["bound"])):
    ax3.plot(log["t"], log["bound"], "--", label="bound")
ax3.set_xlabel("t"); ax3.set_ylabel("E"); ax3.legend()
fig3.tight_layout(); fig3.savefig(here / "energy.png", dpi=150)
print("wrote density.png and energy.png")
'''
