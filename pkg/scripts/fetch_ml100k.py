#!/usr/bin/env python3
"""Place MovieLens 100k ``u.data`` under ``$MCDIFF_DATA_DIR/ml-100k/`` (default ``data/``).

GroupLens (https://grouplens.org/datasets/movielens/100k/) is the primary source:
unpack ``ml-100k.zip`` there yourself, or pass ``--zip`` to extract from a local copy.
Where only a PyPI mirror is reachable, ``--from-recbole`` downloads the RecBole wheel,
which bundles the same 100,000 ratings as ``ml-100k.inter``, and rewrites them in
``u.data`` layout.
"""

import argparse
import io
import os
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

INTER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def from_recbole(version: str) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, f"recbole=={version}"],
            check=True,
        )
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            text = z.read(INTER).decode("latin-1")
    lines = text.splitlines()[1:]  # drop the typed header
    return "\n".join(ln for ln in lines if ln.strip()) + "\n"


def from_zip(path: Path) -> str:
    with zipfile.ZipFile(path) as z:
        name = next(n for n in z.namelist() if n.endswith("ml-100k/u.data"))
        return z.read(name).decode("latin-1")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--zip", type=Path, help="local ml-100k.zip from grouplens.org")
    src.add_argument("--from-recbole", action="store_true", help="extract from the RecBole wheel on PyPI")
    ap.add_argument("--recbole-version", default="1.2.1")
    ap.add_argument("--data-dir", type=Path, default=Path(os.environ.get("MCDIFF_DATA_DIR", "data")))
    args = ap.parse_args(argv)

    text = from_zip(args.zip) if args.zip else from_recbole(args.recbole_version)
    n = sum(1 for _ in io.StringIO(text))
    if n != 100_000:
        sys.exit(f"expected 100000 ratings, found {n}")
    out = args.data_dir / "ml-100k" / "u.data"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="latin-1")
    print(f"wrote {n} ratings to {out}")


if __name__ == "__main__":
    main()
