"""
Dibuja un sweep.csv producido por `dephasewalk sweep`.
Uso:
  python scripts/plot_sweep.py out/fig2_sweep/sweep.csv [--out fig2_ab.png]

Panel superior: Re lambda2, Re lambda3 (tasas de decaimiento).
Panel central: Im lambda2, Im lambda3.
Panel inferior: overlap g entre r2 y r3.
"""
import argparse
import sys
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    ap = argparse.ArgumentParser(description="plot a dephasewalk sweep CSV")
    ap.add_argument("csv")
    ap.add_argument("--out", default=None, help="PNG path (default: next to the CSV)")
    args = ap.parse_args()

    path = Path(args.csv)
    if not path.exists():
        print("ERROR: no existe", path)
        return 1
    data = np.genfromtxt(path, delimiter=",", names=True)

    fig, axes = plt.subplots(3, 1, figsize=(6, 8), sharex=True)
    axes[0].plot(data["beta"], data["re_lambda2"], label=r"Re $\lambda_2$")
    axes[0].plot(data["beta"], data["re_lambda3"], "--", label=r"Re $\lambda_3$")
    axes[0].set_ylabel("decay rate")
    axes[0].legend(loc="best")
    axes[1].plot(data["beta"], data["im_lambda2"], label=r"Im $\lambda_2$")
    axes[1].plot(data["beta"], data["im_lambda3"], "--", label=r"Im $\lambda_3$")
    axes[1].set_ylabel("frequency")
    axes[1].legend(loc="best")
    axes[2].plot(data["beta"], data["g"], color="k")
    axes[2].set_ylabel("g")
    axes[2].set_xlabel(r"$\beta$")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()

    out = Path(args.out) if args.out else path.with_suffix(".png")
    fig.savefig(out, dpi=200)
    plt.close(fig)
    print("Figura guardada en", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
