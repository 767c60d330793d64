#!/usr/bin/env python3
# Copyright 2026 The riskgate Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes samples/subgroup_reference_scores.csv.

The file is built so that, at the threshold where pooled FMR is 1%, the
per-group rates are

    FNMR  M 5/521 = 0.96%   F 5/467 = 1.07%
    FMR   M 19/500 = 3.80%  F 22/490 = 4.49%

Cross-group impostor trials (3110 of them, all scored low) bring the pooled
non-mated count to 4100, so the 41 same-group false matches are exactly 1%.
They fall outside both subgroups under the default assignment policy.
"""

import argparse
import random

MATED = {"M": (521, 5), "F": (467, 5)}
SAME_GROUP_NONMATED = {"M": (500, 19), "F": (490, 22)}
CROSS_GROUP_NONMATED = 3110
THRESHOLD = 0.600000
RUNNER_UP = 0.590000  # highest non-mated score below the threshold


class ScorePool:
    """Distinct six-decimal scores drawn without replacement from a range."""

    def __init__(self, rng):
        self.rng = rng
        self.used = {round(THRESHOLD * 1e6), round(RUNNER_UP * 1e6)}

    def draw(self, lo, hi):
        lo_i, hi_i = round(lo * 1e6), round(hi * 1e6)
        while True:
            v = self.rng.randint(lo_i, hi_i)
            if v not in self.used:
                self.used.add(v)
                return v / 1e6


def build(seed):
    rng = random.Random(seed)
    pool = ScorePool(rng)
    rows = []

    def trial(g1, g2, label, score, n):
        rows.append((f"{g1.lower()}{n:04d}-e", f"{g2.lower()}{n:04d}-t", g1, g2,
                     label, score))

    n = 0
    for g, (count, misses) in MATED.items():
        for i in range(count):
            n += 1
            score = pool.draw(0.05, 0.39) if i < misses else pool.draw(0.62, 0.98)
            trial(g, g, "mated", score, n)
    first_false_match = True
    for g, (count, hits) in SAME_GROUP_NONMATED.items():
        for i in range(count):
            n += 1
            if i < hits:
                score = THRESHOLD if first_false_match else pool.draw(0.61, 0.80)
                first_false_match = False
            else:
                score = pool.draw(-0.40, 0.55)
            trial(g, g, "nonmated", score, n)
    for i in range(CROSS_GROUP_NONMATED):
        n += 1
        g1, g2 = ("M", "F") if i % 2 == 0 else ("F", "M")
        score = RUNNER_UP if i == 0 else pool.draw(-0.60, 0.45)
        trial(g1, g2, "nonmated", score, n)
    rng.shuffle(rows)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="samples/subgroup_reference_scores.csv")
    parser.add_argument("--seed", type=int, default=20260101)
    args = parser.parse_args()
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("enroll_id,test_id,group_enroll,group_test,label,score\n")
        for row in build(args.seed):
            f.write(f"{row[0]},{row[1]},{row[2]},{row[3]},{row[4]},{row[5]:.6f}\n")


if __name__ == "__main__":
    main()
