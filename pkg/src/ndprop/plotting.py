"""Report figures. Files are written with fixed metadata so reruns are byte-identical."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def plot_solve_rates(report, path):
    fig, ax = plt.subplots(figsize=(5, 3.2), dpi=100)
    labels = [r.mode for r in report.rows]
    rates = [r.solve_rate for r in report.rows]
    bars = ax.bar(range(len(rates)), rates, color="#4c72b0")
    for bar, rate in zip(bars, rates):
        ax.text(bar.get_x() + bar.get_width() / 2, rate + 1, f"{rate:.0f}", ha="center", fontsize=8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, fontsize=8)
    ax.set_ylim(0, 110)
    ax.set_ylabel("solved (%)")
    split = report.rows[0].split if report.rows else ""
    ax.set_title(f"solve rate, {split} test set", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)


def plot_training(train_log: dict, path):
    fig, ax = plt.subplots(figsize=(5, 3.2), dpi=100)
    losses = train_log.get("epoch_loss") or []
    ax.plot(range(1, len(losses) + 1), losses, color="#4c72b0", lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("min-BCE loss", color="#4c72b0")
    vals = train_log.get("val_rate") or []
    if vals:
        ax2 = ax.twinx()
        ax2.plot([e for e, _ in vals], [r for _, r in vals], "o-", color="#dd8452", ms=3, lw=1)
        ax2.set_ylabel("val solved (%)", color="#dd8452")
        ax2.set_ylim(-5, 105)
    if not losses and not vals:
        ax.text(0.5, 0.5, "no training", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)
