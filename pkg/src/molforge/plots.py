"""Figure rendering: truth / prediction / absolute-difference triptychs."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .catalog import get_equation


def triptych(sample, prediction: np.ndarray, out_path: str) -> str:
    """Save one PNG comparing ground truth and prediction.

    Spatial families render as (t, x) heatmaps; ODE families as per-channel
    time series with the prediction dashed.
    """
    spec = get_equation(sample.family_index)
    truth = np.asarray(sample.values, dtype=np.float64)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    if spec.is_ode:
        pred_traj = np.asarray(prediction)[:, : spec.state_dim]
        fig, ax = plt.subplots(figsize=(6, 4))
        t = np.asarray(sample.times)
        for d in range(spec.state_dim):
            line, = ax.plot(t, truth[:, d], label=f"truth[{d}]")
            ax.plot(t, pred_traj[:, d], "--", color=line.get_color(),
                    label=f"pred[{d}]")
        ax.set_xlabel("t")
        ax.legend(fontsize=7)
        ax.set_title(f"{spec.name} (family {spec.index})")
    else:
        pred_field = np.asarray(prediction)[:, 0].reshape(truth.shape)
        diff = np.abs(pred_field - truth)
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
        extent = [0.0, spec.domain_length, spec.time_horizon, 0.0]
        vmin, vmax = truth.min(), truth.max()
        for ax, field, title, kw in (
                (axes[0], truth, "ground truth", dict(vmin=vmin, vmax=vmax)),
                (axes[1], pred_field, "prediction", dict(vmin=vmin, vmax=vmax)),
                (axes[2], diff, "absolute difference", {})):
            im = ax.imshow(field, aspect="auto", extent=extent,
                           cmap="viridis", **kw)
            ax.set_title(title, fontsize=9)
            ax.set_xlabel("x")
            fig.colorbar(im, ax=ax, fraction=0.046)
        axes[0].set_ylabel("t")
        fig.suptitle(f"{spec.name} (family {spec.index})", fontsize=10)
        fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return str(out_path)
