#!/usr/bin/env python3
"""Extract MovieLens-100K (u.data layout) from the pytorch-widedeep wheel.

The wheel ships the raw 100k rating log as a parquet file; this writes it
back out as the tab-separated `user item rating timestamp` format.
"""
import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "ml-100k", "u.data"))
    args = ap.parse_args()
    out = os.path.abspath(args.out)
    if os.path.exists(out):
        print(f"{out} already present")
        return 0
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                               "-d", tmp, "pytorch-widedeep"])
        wheel = glob.glob(os.path.join(tmp, "pytorch_widedeep*.whl"))[0]
        df = pd.read_parquet(io.BytesIO(zipfile.ZipFile(wheel).read(MEMBER)))
    os.makedirs(os.path.dirname(out), exist_ok=True)
    df[["user_id", "movie_id", "rating", "timestamp"]].to_csv(out, sep="\t", header=False, index=False)
    print(f"wrote {len(df)} interactions to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
