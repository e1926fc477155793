"""Fetch MovieLens 100K and write it in the 1M ``::`` layout.

GroupLens hosting is not always reachable, so the files are taken from the
recbole wheel on PyPI (it bundles ml-100k as atomic files). The data is
written locally only; the GroupLens license does not allow redistribution.

    python scripts/fetch_ml100k.py data/ml-100k [--wheel path/to/recbole.whl]
"""
import argparse
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

PREFIX = "recbole/dataset_example/ml-100k/"


def find_wheel(tmp):
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
                    "-d", tmp, "recbole==1.2.1"], check=True)
    return next(Path(tmp).glob("recbole-*.whl"))


def convert(wheel, out):
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        inter = z.read(PREFIX + "ml-100k.inter").decode("utf-8").splitlines()[1:]
        items = z.read(PREFIX + "ml-100k.item").decode("latin-1").splitlines()[1:]
    with open(out / "ratings.dat", "w", encoding="utf-8") as fh:
        for line in inter:
            u, m, r, ts = line.split("\t")
            fh.write(f"{u}::{m}::{int(float(r))}::{int(float(ts))}\n")
    with open(out / "movies.dat", "w", encoding="utf-8") as fh:
        for line in items:
            parts = line.split("\t")
            mid, title = parts[0], parts[1]
            year = parts[2] if len(parts) > 2 else ""
            genres = [g for g in (parts[3].split() if len(parts) > 3 else []) if g != "unknown"]
            fh.write(f"{mid}::{title} ({year})::{'|'.join(genres)}\n")
    print(f"wrote {out / 'ratings.dat'} ({len(inter)} ratings), {out / 'movies.dat'} ({len(items)} movies)")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", nargs="?", default="data/ml-100k")
    ap.add_argument("--wheel")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        wheel = Path(args.wheel) if args.wheel else find_wheel(tmp)
        convert(wheel, Path(args.out))


if __name__ == "__main__":
    main()
