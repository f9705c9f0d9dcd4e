"""Write the bundled MNIST 0/1 subset as gzipped IDX files.

Source: the 5000-image MNIST sample shipped inside the ``mlxtend`` wheel
(``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per digit, label in the
last column). Usage::

    pip download mlxtend --no-deps -d /tmp
    python tools/extract_mnist01.py /tmp/mlxtend-*.whl
"""

import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "qhypernet" / "data"


def main(wheel: str) -> None:
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    images = table[:, :-1].astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    keep = labels <= 1
    images, labels = images[keep], labels[keep]

    img_bytes = struct.pack(">IIII", 0x00000803, len(images), 28, 28) + images.tobytes()
    lbl_bytes = struct.pack(">II", 0x00000801, len(labels)) + labels.tobytes()
    # mtime=0 keeps the archives byte-stable
    for name, payload in [("mnist01-images-idx3-ubyte.gz", img_bytes),
                          ("mnist01-labels-idx1-ubyte.gz", lbl_bytes)]:
        with open(OUT / name, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
            gz.write(payload)
    print(f"wrote {len(images)} images ({np.bincount(labels).tolist()} per class) to {OUT}")


if __name__ == "__main__":
    main(sys.argv[1])
