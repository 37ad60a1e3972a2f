"""
Dibuja relax.csv (o relax_marginal.csv) producido por `dephasewalk relax`.
Uso:
  python scripts/plot_relax.py out/fig2d_relax/relax.csv [--out fig2d.png]

Panel izquierdo: probabilidades de ocupacion por paso.
Panel derecho: |p_n - 1/N| en escala log (el inset de las figuras).
"""
import argparse
import sys
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    ap = argparse.ArgumentParser(description="plot a dephasewalk relaxation CSV")
    ap.add_argument("csv")
    ap.add_argument("--out", default=None)
    ap.add_argument("--floor", type=float, default=1e-15, help="lower clip for the log panel")
    args = ap.parse_args()

    path = Path(args.csv)
    if not path.exists():
        print("ERROR: no existe", path)
        return 1
    data = np.genfromtxt(path, delimiter=",", names=True)
    cols = [c for c in data.dtype.names if c.startswith("p_")]
    n = len(cols)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for c in cols:
        ax1.plot(data["step"], data[c], marker=".", label=c)
        ax2.semilogy(data["step"], np.clip(np.abs(data[c] - 1.0 / n), args.floor, None), label=c)
    ax1.axhline(1.0 / n, color="k", lw=0.5)
    ax1.set_xlabel("step")
    ax1.set_ylabel("probability")
    ax2.set_xlabel("step")
    ax2.set_ylabel(f"|p - 1/{n}|")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize="small")
    fig.tight_layout()

    out = Path(args.out) if args.out else path.with_suffix(".png")
    fig.savefig(out, dpi=200)
    plt.close(fig)
    print("Figura guardada en", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
