#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the experiment grid configs: 6 orders x 5 variants x attention kinds."""

import argparse
import pathlib

VARIANTS = {
    "seq2seq": {"hierarchical": "false"},
    "hd": {},
    "hd_repeat": {"repeat_input": "true"},
    "hd_curriculum": {"curriculum": "true"},
    "all": {"repeat_input": "true", "curriculum": "true"},
}
ATTENTION = ["none", "dot", "general", "concat"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="configs/grid")
    ap.add_argument("--train", default="../../data/e2e_fixture.tagged.jsonl")
    ap.add_argument("--test", default="../../data/e2e_fixture_test.tagged.jsonl")
    ap.add_argument("--epochs", type=int, default=20)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for order in range(1, 7):
        for name, flags in VARIANTS.items():
            for attn in ATTENTION:
                if name == "seq2seq" and attn != "none":
                    continue
                run_id = f"o{order}_{name}" + ("" if attn == "none" else f"_{attn}")
                lines = [
                    "# SPDX-License-Identifier: Apache-2.0",
                    f"train = {args.train}",
                    f"test = {args.test}",
                    f"order = {order}",
                    *(f"{k} = {v}" for k, v in flags.items()),
                    f"attention = {attn}",
                    f"epochs = {args.epochs}",
                ]
                (out / f"{run_id}.cfg").write_text("\n".join(lines) + "\n")
                count += 1
    print(f"wrote {count} configs to {out}")


if __name__ == "__main__":
    main()
