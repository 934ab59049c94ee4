"""Draw p-value functions: per-study curves and their combinations.

A two-sided p-value function maps each candidate average effect mu to the
evidence against it, peaking at 1 at the point estimate and falling toward 0
away from it.  Plotting every study's curve plus the combined curves in one
panel (a drapery plot) shows at a glance where the studies agree, how much
the heterogeneity adjustment widens the pooled curve, and how asymmetric the
evidence is.

Writes demos/output/pvalue_surfaces.png when matplotlib is available;
always writes the plotted grid to demos/output/pvalue_surfaces.csv.

Run:  python3 demos/pvalue_surfaces.py
"""

import csv
import pathlib

import numpy as np

import cdmeta

OUT_DIR = pathlib.Path(__file__).resolve().parent / "output"


def main():
    ma = cdmeta.serenoa()
    report = cdmeta.analyze(
        ma,
        cdmeta.AnalysisOptions(seed=42, curves=True, curve_grid=401),
    )
    curves = report.curves
    grid = np.array(curves["mu_grid"])

    OUT_DIR.mkdir(exist_ok=True)
    csv_path = OUT_DIR / "pvalue_surfaces.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        names = list(curves["methods"]) + [f"study: {s}" for s in curves["studies"]]
        writer.writerow(["mu"] + names)
        columns = [curves["methods"][m]["p_two_sided"] for m in curves["methods"]]
        columns += [curves["studies"][s]["p_two_sided"] for s in curves["studies"]]
        for i, mu in enumerate(grid):
            writer.writerow([mu] + [col[i] for col in columns])
    print(f"wrote {csv_path}")

    for name, block in curves["methods"].items():
        p = np.array(block["p_two_sided"])
        peak = grid[int(np.argmax(p))]
        inside = grid[p >= 0.05]
        print(
            f"{name:<18s} peak near {peak:6.2f}, "
            f"p >= 0.05 on [{inside.min():6.2f}, {inside.max():6.2f}]"
        )

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping the figure")
        return

    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for label, block in curves["studies"].items():
        ax.plot(grid, block["p_two_sided"], color="0.8", lw=0.8, zorder=1)
    for name, style in [
        ("ivw", ":"),
        ("hksj", "--"),
        ("edgington", "-."),
        ("cd-edgington-mc", "-"),
        ("cd-edgington-gaq", "-"),
    ]:
        if name in curves["methods"]:
            ax.plot(
                grid,
                curves["methods"][name]["p_two_sided"],
                style,
                lw=1.6,
                label=name,
                zorder=2,
            )
    ax.axhline(0.05, color="k", lw=0.6)
    ax.set_xlabel("average effect (log odds ratio)")
    ax.set_ylabel("two-sided p-value")
    ax.set_xlim(-3.5, 1.5)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    png_path = OUT_DIR / "pvalue_surfaces.png"
    fig.savefig(png_path, dpi=150)
    print(f"wrote {png_path}")


if __name__ == "__main__":
    main()
