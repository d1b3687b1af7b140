"""Regenerate golden values from the naive oracles only (never the fast enumerators).

    python3 tests/golden/make_golden.py
"""
import json
import math
from pathlib import Path

import numpy as np
from scipy.special import ellipkm1

from latticecount.enumeration import brute_force_norm_ball, brute_force_sl3

OUT = Path(__file__).with_name("golden.json")


def hc_oracle(s: float) -> float:
    # complete elliptic integral form of the K-average
    return 2 / math.pi * math.exp(-s / 2) * float(ellipkm1(math.exp(-2 * s)))


def main():
    sl2_R = list(range(2, 61)) + [100, 150, 200, 300, 400]
    big = brute_force_norm_ball(max(sl2_R))
    norms = (big * big).sum(1)
    sl2 = {str(R): int((norms <= R).sum()) for R in sl2_R}

    cosets = {}
    for N in (2, 3, 4):
        sub = big[norms <= 60] % N
        keys, counts = np.unique(sub, axis=0, return_counts=True)
        cosets[str(N)] = {",".join(map(str, k)): int(c) for k, c in zip(keys, counts)}

    sl3 = {str(R): brute_force_sl3(R) for R in range(3, 9)}

    grid = np.linspace(0.0, 20.0, 401)
    hc_C = max(hc_oracle(s) * math.exp(s / 2) / (1 + s) for s in grid)

    data = {
        "sl2_norm_ball": sl2,
        "sl2_cosets_R60": cosets,
        "sl3_norm_ball": sl3,
        "hc_envelope_C_0_20": hc_C,
    }
    OUT.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
