"""Write the nine synthetic benchmark datasets plus manifest.json.

    python3 scripts/make_synth_suite.py --seed 0 --out data/synth
"""

import argparse

from imputebench.synthgen import load_manifest, write_suite


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="data/synth")
    args = ap.parse_args()
    manifest = write_suite(args.out, args.seed)
    for d in load_manifest(manifest):
        kinds = sorted({d.schema[j].kind for j in d.feature_indices})
        print(f"{d.name:26s} {d.n_rows:5d} x {d.n_features:2d}  {'/'.join(kinds)}")
    print(f"manifest: {manifest}")


if __name__ == "__main__":
    main()
