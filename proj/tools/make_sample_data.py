#!/usr/bin/env python3
"""Regenerates data/sample_flows.csv, a synthetic flow capture.

Benign flows: short-ish durations, small average packets, varied inter-arrival
jitter. DDoS flows: floods of near-identical large packets with tiny jitter.
Header cells keep the leading spaces seen in real capture exports.
"""
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "sample_flows.csv"

HEADER = ["Destination Port", " Flow Duration", " Total Fwd Packets",
          " Bwd Packet Length Std", " Flow IAT Std", " Average Packet Size",
          " Label"]


def benign(rng):
    port = rng.choice([80, 443, 53, 22, 8080, 3389])
    duration = rng.randint(40, 9_000_000)
    fwd = rng.randint(1, 40)
    bwd_std = round(rng.uniform(0.0, 180.0), 2)
    iat_std = round(rng.uniform(10.0, 250_000.0), 2)
    avg = round(rng.uniform(40.0, 320.0), 2)
    return [port, duration, fwd, bwd_std, iat_std, avg, "BENIGN"]


def ddos(rng):
    port = 80
    duration = rng.randint(9_000_000, 120_000_000)
    fwd = rng.randint(400, 9_000)
    bwd_std = round(rng.uniform(900.0, 2_200.0), 2)
    iat_std = round(rng.uniform(0.0, 9.0), 2)
    avg = round(rng.uniform(780.0, 1_460.0), 2)
    return [port, duration, fwd, bwd_std, iat_std, avg, "DDoS"]


def main():
    rng = random.Random(20170707)
    rows, seen = [], set()
    while sum(1 for r in rows if r[-1] == "BENIGN") < 60:
        row = benign(rng)
        key = tuple(row[:-1])
        if key not in seen:
            seen.add(key)
            rows.append(row)
    while sum(1 for r in rows if r[-1] == "DDoS") < 60:
        row = ddos(rng)
        key = tuple(row[:-1])
        if key not in seen:
            seen.add(key)
            rows.append(row)
    rng.shuffle(rows)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", newline="") as f:
        f.write(",".join(HEADER) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
    print(f"wrote {len(rows)} rows -> {OUT}")


if __name__ == "__main__":
    main()
