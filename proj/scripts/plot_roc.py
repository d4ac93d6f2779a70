#!/usr/bin/env python3
"""Plot averaged ROC CSVs written by `pcaids simulate` (or single ROC CSVs from `pcaids evaluate`)."""
import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_curves(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    cols = list(zip(*[[float(x) for x in r] for r in body]))
    return {name: cols[i] for i, name in enumerate(header)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+", help="ROC CSV files; one panel each")
    ap.add_argument("-o", "--output", default="roc.png")
    args = ap.parse_args()
    fig, axes = plt.subplots(1, len(args.csv), figsize=(4 * len(args.csv), 4), squeeze=False)
    for ax, path in zip(axes[0], args.csv):
        curves = read_curves(path)
        fpr = curves.pop("fpr")
        for name, tpr in curves.items():
            ax.plot(fpr, tpr, label=name.removeprefix("tpr_").upper())
        ax.plot([0, 1], [0, 1], color="grey", lw=0.5, ls=":")
        ax.set_title(path.rsplit("/", 1)[-1])
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    return 0


if __name__ == "__main__":
    sys.exit(main())
