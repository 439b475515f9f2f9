"""Render the standard figure set from exported run CSVs: flight path,
position traces, obstacle clearance, control signals, solver diagnostics and
the thrust-constant estimate."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .harness import read_csv_columns  # noqa: E402
from .obstacles import VerticalCylinder  # noqa: E402
from .scenario import ScenarioConfig  # noqa: E402


def _save(fig, out_dir: Path, name: str, created: list[Path]) -> None:
    path = out_dir / name
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    created.append(path)


def _cylinder_radii(scenario: Optional[ScenarioConfig]):
    """(center, raw radius, enlarged radius) of the first cylinder, if any."""
    if scenario is None:
        return None
    for ob in scenario.raw_obstacles:
        for con in ob.constraints:
            if isinstance(con, VerticalCylinder):
                return (con.center, con.radius,
                        con.radius + scenario.ocp.corners.total_inflation)
    return None


def render_figures(traj_csv: Union[str, Path], diag_csv: Union[str, Path],
                   out_dir: Union[str, Path],
                   scenario: Optional[ScenarioConfig] = None) -> list[Path]:
    """Write the figure set as PNG files into out_dir; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = read_csv_columns(traj_csv)
    diag = read_csv_columns(diag_csv)
    created: list[Path] = []
    t = traj["t"]

    # top-down path around the obstacle
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(traj["px"], traj["py"], lw=1.0, color="C0")
    ax.plot(traj["px"][0], traj["py"][0], "go", label="start")
    ax.plot(traj["px"][-1], traj["py"][-1], "rs", label="end")
    cyl = _cylinder_radii(scenario)
    if cyl is not None:
        center, r_raw, r_enl = cyl
        for r, style, label in ((r_raw, "k-", "obstacle"),
                                (r_enl, "k--", "enlarged")):
            ang = np.linspace(0, 2 * np.pi, 200)
            ax.plot(center[0] + r * np.cos(ang), center[1] + r * np.sin(ang),
                    style, lw=1.0, label=label)
    if scenario is not None:
        for w in scenario.schedule.waypoints:
            ax.plot(w[0], w[1], "k*", ms=10)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("flight path (top view)")
    _save(fig, out_dir, "path_xy.png", created)

    # position components over time
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 6))
    for ax, comp, name in zip(axes, ("px", "py", "pz"), ("x", "y", "z")):
        ax.plot(t, traj[comp], lw=1.0)
        ax.set_ylabel(f"{name} [m]")
        ax.grid(alpha=0.3)
    switches = np.flatnonzero(np.diff(traj["ref_idx"]) != 0)
    for ax in axes:
        for s in switches:
            ax.axvline(t[s + 1], color="0.7", lw=0.6)
    axes[-1].set_xlabel("t [s]")
    axes[0].set_title("position vs time")
    _save(fig, out_dir, "position_vs_time.png", created)

    # clearance from the cylinder axis
    if np.any(np.isfinite(traj["dist_axis"])):
        fig, ax = plt.subplots(figsize=(8, 3.2))
        ax.plot(t, traj["dist_axis"], lw=1.0)
        if cyl is not None:
            ax.axhline(cyl[2], color="0.4", lw=1.0, label="enlarged radius")
            ax.axhline(cyl[1], color="0.4", lw=1.0, ls=":", label="obstacle radius")
            ax.legend(fontsize=8)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("distance to axis [m]")
        ax.grid(alpha=0.3)
        _save(fig, out_dir, "distance_to_axis.png", created)

    # commanded inputs and the normalized thrust signal
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 6))
    axes[0].plot(t, traj["Td"], lw=1.0)
    axes[0].set_ylabel("thrust [m/s$^2$]")
    axes[1].plot(t, np.degrees(traj["roll_d"]), lw=1.0, label="roll")
    axes[1].plot(t, np.degrees(traj["pitch_d"]), lw=1.0, label="pitch")
    axes[1].axhline(np.degrees(0.5), color="0.6", lw=0.7, ls="--")
    axes[1].axhline(np.degrees(-0.5), color="0.6", lw=0.7, ls="--")
    axes[1].set_ylabel("angle ref [deg]")
    axes[1].legend(fontsize=8)
    axes[2].plot(t, traj["uT"], lw=1.0)
    axes[2].set_ylabel("$u_T$ [-]")
    axes[2].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    axes[0].set_title("control signals")
    _save(fig, out_dir, "control_signals.png", created)

    # solver statistics
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(8, 8))
    td = diag["t"]
    axes[0].plot(td, diag["iters"], lw=0.8)
    axes[0].set_ylabel("iterations")
    axes[1].plot(td, 1e3 * diag["solve_time_s"], lw=0.8)
    axes[1].set_ylabel("solve time [ms]")
    axes[2].plot(td, 1e6 * diag["avg_iter_time_s"], lw=0.8)
    axes[2].set_ylabel("iter time [$\\mu$s]")
    axes[3].semilogy(td, np.maximum(diag["res_inf"], 1e-16), lw=0.8)
    axes[3].set_ylabel("$\\|r\\|_\\infty$")
    axes[3].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    axes[0].set_title("solver diagnostics")
    _save(fig, out_dir, "solver_diagnostics.png", created)

    # thrust-constant estimate
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    axes[0].plot(td, diag["C_hat"], lw=1.0, label="$\\widehat{C}$")
    band = np.sqrt(diag["P"])
    axes[0].fill_between(td, diag["C_hat"] - band, diag["C_hat"] + band,
                         alpha=0.2, label="$\\pm\\sqrt{P}$")
    axes[0].set_ylabel("thrust constant [m/s$^2$]")
    axes[0].legend(fontsize=8)
    axes[1].plot(t, traj["uT"], lw=1.0)
    axes[1].set_ylabel("$u_T$ [-]")
    axes[1].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    axes[0].set_title("thrust estimation")
    _save(fig, out_dir, "thrust_estimate.png", created)

    return created
