"""Matplotlib figure rendering for reports and training histories.

Figures are written to files next to the delimited output; nothing here
opens a display, so the Agg backend is forced before pyplot loads.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import ReportGrid  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (8.0, 4.5),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
})


def save_report_figure(grid: ReportGrid, path: str):
    """Grouped bar chart of macro-F1 per model (grouped by test column)."""
    fig, ax = plt.subplots()
    n_rows = len(grid.row_names)
    n_cols = len(grid.col_names)
    width = 0.8 / max(n_rows, 1)
    for r, name in enumerate(grid.row_names):
        xs, ys = [], []
        for c in range(n_cols):
            rep = grid.cells[r][c]
            if rep is None:
                continue
            xs.append(c + r * width)
            ys.append(rep.macro_f1)
        ax.bar(xs, ys, width=width, label=name)
    ax.set_xticks([c + 0.4 - width / 2 for c in range(n_cols)])
    ax.set_xticklabels(grid.col_names)
    ax.set_ylabel("macro F1")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_history_figure(history: list[dict], path: str):
    """Training loss and validation macro-F1 curves on twin axes."""
    fig, ax = plt.subplots()
    epochs = [h["epoch"] for h in history]
    ax.plot(epochs, [h["train_loss"] for h in history], color="tab:blue", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("train loss", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(epochs, [h["val_macro_f1"] for h in history], color="tab:orange",
             label="val macro F1")
    ax2.set_ylabel("val macro F1", color="tab:orange")
    ax2.set_ylim(0, 1.05)
    ax2.grid(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
