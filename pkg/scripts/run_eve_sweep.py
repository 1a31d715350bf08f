#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Sweep Eve's position uncertainty (delta_d, delta_theta) for a correlated
eavesdropper on range-angle data, one full pipeline per grid point, and
collect entropy, agreement and MI bounds into a summary CSV
"""

import argparse
import copy
import csv
import json
import os
import sys

from run_pipeline import REPO_ROOT, run_pipeline

DELTA_D = (10.0, 5.0, 3.0, 1.0)
DELTA_THETA = (15.0, 10.0, 5.0)
DEFAULT_CONFIG = os.path.join(REPO_ROOT, "configs", "ramap_paper.json")


def load_metrics(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.strip().partition(" = ")
            values[key] = value
    return values


def main():
    """Main function."""
    parser = argparse.ArgumentParser(description="Eavesdropper position-uncertainty sweep")
    parser.add_argument("--config", default=DEFAULT_CONFIG, help="Base range-angle configuration (JSON)")
    parser.add_argument("--q", type=int, nargs="+", default=None, help="Alphabet sizes (default from config)")
    parser.add_argument("--delta-d", type=float, nargs="+", default=list(DELTA_D), help="Range widths (m)")
    parser.add_argument("--delta-theta", type=float, nargs="+", default=list(DELTA_THETA),
                        help="Angle widths (deg)")
    parser.add_argument("--out-dir", default="runs/sweep", help="Output directory")

    args = parser.parse_args()

    with open(args.config, encoding="utf-8") as fh:
        base = json.load(fh)
    if "ramap" not in base.get("source", {}):
        print("Error: the sweep needs a ramap source")
        sys.exit(1)

    q_values = args.q or [base.get("vpq", {}).get("q")]
    summary = []
    for q in q_values:
        for delta_d in args.delta_d:
            for delta_theta in args.delta_theta:
                doc = copy.deepcopy(base)
                ramap = doc["source"]["ramap"]
                ramap.update(eve_mode="correlated", eve_delta_d=delta_d, eve_delta_theta=delta_theta)
                if q is not None:
                    doc.setdefault("vpq", {})["q"] = q
                run_dir = os.path.join(args.out_dir, f"q{q or 'cfg'}_d{delta_d:g}_t{delta_theta:g}")
                os.makedirs(run_dir, exist_ok=True)
                config = os.path.join(run_dir, "config.json")
                with open(config, "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, indent=2)

                shared = doc.get("vpq", {}).get("shared_encoder", True)
                run_pipeline(config, run_dir, with_eve=True, shared=shared)
                metrics = load_metrics(os.path.join(run_dir, "metrics.txt"))
                row = {"q": q or "", "delta_d": delta_d, "delta_theta": delta_theta,
                       "h_w_bits": metrics.get("h_w_bits"), "agree_rate": metrics.get("agree_rate"),
                       "i_vlb_bits": metrics.get("i_vlb_bits"), "i_vub_bits": metrics.get("i_vub_bits")}
                print(row)
                summary.append(row)

    summary_path = os.path.join(args.out_dir, "summary.csv")
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary[0]))
        writer.writeheader()
        writer.writerows(summary)
    print(f"Summary written to {summary_path}")


if __name__ == "__main__":
    main()
