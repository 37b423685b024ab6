"""Turn the 5,000-image MNIST sample shipped inside the ``mlxtend`` wheel into IDX files.

Full MNIST cannot always be downloaded (offline machines, package-mirror-only
sandboxes). The ``mlxtend`` wheel bundles ``mlxtend/data/data/mnist_5k.csv.gz``:
500 real MNIST digits per class, one row of 784 pixels plus a trailing label.
This script shuffles it with a fixed seed, splits it into train/test and
writes the four standard IDX files so the rest of the toolchain can read it
exactly like the original distribution.

    pip download mlxtend==0.24.0 --no-deps -d /tmp/mlx
    python demos/mnist_sample_to_idx.py /tmp/mlx/mlxtend-0.24.0-py3-none-any.whl data/mnist5k
"""

import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from ssbnn.io import MNIST_FILES, idx_from_array, write_idx
from ssbnn.sampling import SeededRng

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def load_sample(source: Path) -> tuple[np.ndarray, np.ndarray]:
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as zf:
            raw = zf.read(MEMBER)
    else:
        raw = source.read_bytes()
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",", dtype=np.int64)
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="mlxtend wheel or the extracted mnist_5k.csv.gz")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    images, labels = load_sample(args.source)
    order = SeededRng(args.seed, 0).permutation(len(labels))
    images, labels = images[order], labels[order]
    split = len(labels) - args.n_test
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, sl in (("train", slice(0, split)), ("test", slice(split, None))):
        img_name, lbl_name = MNIST_FILES[name]
        write_idx(idx_from_array(images[sl].reshape(-1, 28, 28)), args.out_dir / img_name)
        write_idx(idx_from_array(labels[sl]), args.out_dir / lbl_name)
        print(f"{name}: {sl.stop - sl.start if sl.stop else len(labels) - split} images "
              f"-> {args.out_dir / img_name}")


if __name__ == "__main__":
    main()
