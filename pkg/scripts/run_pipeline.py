#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Run gen -> train -> eval -> keys for one config and, with --check-repro,
run it a second time and compare every output byte for byte
"""

import argparse
import filecmp
import os
import subprocess
import sys

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def run_command(cmd, capture_output=True):
    """Run a command list.

    Args:
        cmd (list): Command and arguments
        capture_output (bool): Whether to capture output

    Returns:
        str: Command output if capture_output is True
    """
    print(f"Running: {' '.join(cmd)}")
    result = subprocess.run(cmd, capture_output=capture_output, text=True, cwd=REPO_ROOT)

    if result.returncode != 0:
        print(f"Error executing command (exit {result.returncode}): {' '.join(cmd)}")
        print(f"Error: {result.stderr}")
        sys.exit(result.returncode)

    return result.stdout if capture_output else None


def vcrx(*args):
    return [sys.executable, "-m", "functions.vcrx", *args]


def run_pipeline(config, out_dir, seed=None, with_eve=False, shared=True):
    """Run every stage into out_dir and return the list of files produced."""
    config, out_dir = os.path.abspath(config), os.path.abspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    seed_args = ["--seed", str(seed)] if seed is not None else []
    train = os.path.join(out_dir, "train.data")
    test = os.path.join(out_dir, "test.data")
    prefix = os.path.join(out_dir, "run")

    run_command(vcrx("gen", "--config", config, *seed_args, "--out", train))
    run_command(vcrx("gen", "--config", config, *seed_args, "--out", test, "--split", "test"))
    run_command(vcrx("train", "--config", config, *seed_args, "--data", train, "--out", prefix))

    models = ["--model", f"{prefix}.encoder.model"] if shared else \
        ["--model", f"{prefix}.encoder_x.model", "--model", f"{prefix}.encoder_y.model"]
    predictor = ["--predictor", f"{prefix}.predictor.model"] if with_eve else []
    mi = ["--mi"] if with_eve else []
    run_command(vcrx("eval", "--config", config, *seed_args, "--data", test, *models, *predictor, *mi,
                     "--out", os.path.join(out_dir, "metrics.txt")))
    run_command(vcrx("keys", "--config", config, *seed_args, "--data", test, *models, *predictor,
                     "--out", os.path.join(out_dir, "keys.csv")))
    return sorted(os.listdir(out_dir))


def main():
    """Main function."""
    parser = argparse.ArgumentParser(description="Run the vcrx pipeline for one configuration")
    parser.add_argument("--config", required=True, help="Run configuration (JSON)")
    parser.add_argument("--out-dir", default="runs/pipeline", help="Output directory")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--eve", action="store_true", help="Config models an eavesdropper")
    parser.add_argument("--separate-encoders", action="store_true", help="Config trains two encoders")
    parser.add_argument("--check-repro", action="store_true", help="Run twice and compare outputs")

    args = parser.parse_args()

    first = os.path.join(args.out_dir, "first")
    files = run_pipeline(args.config, first, args.seed, args.eve, not args.separate_encoders)
    print(f"Outputs in {first}: {', '.join(files)}")
    print(open(os.path.join(first, "metrics.txt"), encoding="utf-8").read())

    if args.check_repro:
        second = os.path.join(args.out_dir, "second")
        run_pipeline(args.config, second, args.seed, args.eve, not args.separate_encoders)
        _, mismatch, errors = filecmp.cmpfiles(first, second, files, shallow=False)
        if mismatch or errors:
            print(f"Outputs differ between runs: {mismatch + errors}")
            sys.exit(1)
        print(f"All {len(files)} outputs are byte-identical across runs")


if __name__ == "__main__":
    main()
