#!/usr/bin/env python3
"""Plot recipes for the CSV tables written by `ota`.

Usage: plot_results.py <table.csv> [output.png]

The scenario is read from the `# scenario:` metadata line.
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def load(path):
    meta = {}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
    df = pd.read_csv(path, comment="#")
    # strip units from "name [unit]" headers
    df.columns = [c.split(" [")[0] for c in df.columns]
    return meta, df


def estimation(df, ax):
    ax.loglog(df["N"], df["d_analog_emp"], "o", label="analog (MC)")
    ax.loglog(df["N"], df["d_analog_ana"], "-", label="analog (closed form)")
    ax.loglog(df["N"], df["d_digital"], "s--", label="quantize-and-forward")
    ax.set_xlabel("sensors N")
    ax.set_ylabel("distortion")


def detection(df, ax):
    for n, g in df.groupby("N"):
        ax.semilogy(g["snr_db"], g["p_error"], "o-", label=f"N = {n}")
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("error probability")


def profile(df, ax):
    ax.plot(df["lat_deg"], df["mean"], "-", label="mean")
    ax.fill_between(df["lat_deg"], df["min"], df["max"], alpha=0.25, label="min to max")
    ax.set_xlabel("latitude [deg]")
    ax.set_ylabel("satellites in LoS")


def ota_mse(df, ax):
    for policy, g in df.groupby("policy"):
        ax.plot(g["phase_err_std"], g["mse"], "o-", label=policy)
    ax.set_xlabel("phase error std [rad]")
    ax.set_ylabel("MSE")


RECIPES = {
    "estimation-scaling": estimation,
    "detection-sweep": detection,
    "constellation-profile": profile,
    "constellation-ota-mse": ota_mse,
}


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"
    meta, df = load(path)
    scenario = meta.get("scenario")
    if scenario not in RECIPES:
        sys.exit(f"no plot recipe for scenario {scenario!r}")
    fig, ax = plt.subplots(figsize=(6, 4))
    RECIPES[scenario](df, ax)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title(f"{scenario} (seed {meta.get('seed')})")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
