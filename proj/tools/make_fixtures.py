#!/usr/bin/env python3
"""Regenerate tests/fixtures/oracle_fixtures.json with the gffpin CLI.

Each case is computed by the subset expansion and cross-checked against importance
sampling with 10^7 exact free-field draws before it is frozen.
"""
import argparse
import json
import math
import pathlib
import subprocess
import sys
import tempfile

CASES = [
    dict(d=2, n=1, law="constant", b=0.0, h=0.5, env_seed=1),
    dict(d=2, n=2, law="bernoulli", b=1.0, h=0.0, env_seed=7),
    dict(d=2, n=2, law="gaussian", b=0.8, h=0.1, env_seed=3),
    dict(d=1, n=4, law="bernoulli", b=1.0, h=0.2, env_seed=5),
    dict(d=3, n=2, law="bernoulli", b=0.5, h=0.1, env_seed=11),
    dict(d=2, n=3, law="bernoulli", b=0.5, h=0.2, env_seed=13),
]


def run(cli, command, case, workdir, extra=()):
    run_dir = pathlib.Path(workdir) / f"{command}-{case['d']}-{case['n']}-{case['law']}-{case['env_seed']}"
    args = [cli, command, "--run_dir", str(run_dir), "--a", "1", "--dyn_seed", "1"]
    for key in ("d", "n", "law", "b", "h", "env_seed"):
        args += [f"--{key}", str(case[key])]
    subprocess.run(list(args) + list(extra), check=True, capture_output=True, text=True)
    return json.loads((run_dir / "result.json").read_text())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cli", default="build/tools/gffpin")
    ap.add_argument("--out", default="tests/fixtures/oracle_fixtures.json")
    ap.add_argument("--samples", type=int, default=10_000_000)
    args = ap.parse_args()

    fixtures = []
    with tempfile.TemporaryDirectory() as work:
        for case in CASES:
            exact = run(args.cli, "oracle", case, work)
            check = run(args.cli, "free-energy", case, work,
                        ["--method", "importance", "--samples", str(args.samples)])
            se = math.hypot(exact["std_error"], check["std_error"])
            agree = abs(exact["value"] - check["value"]) <= 3 * se
            print(f"{case}: expansion {exact['value']:.10f} +- {exact['std_error']:.1e}, "
                  f"importance {check['value']:.6f} +- {check['std_error']:.1e} "
                  f"{'ok' if agree else 'DISAGREE'}")
            if not agree:
                sys.exit(1)
            fx = exact["fixture"]
            fx["tol"] = max(3 * exact["std_error"], 1e-12)
            fx["importance_check"] = {"samples": args.samples, "value": check["value"],
                                      "std_error": check["std_error"]}
            fixtures.append(fx)
    pathlib.Path(args.out).write_text(json.dumps(fixtures, indent=2) + "\n")


if __name__ == "__main__":
    main()
