"""File formats: TTEN tensors, TT chain containers, model directories, PGM images.

TTEN layout (all little-endian)::

    b"TTEN" | u8 version = 1 | u32 N | N x u64 dims | prod(dims) x f64

with the values in first-mode-fastest order.
"""
import csv
import json
import os
import struct
import zipfile
from pathlib import Path

import numpy as np

from .data import LabeledTensorSet
from .tt import TTChain

__all__ = [
    "write_tten",
    "read_tten",
    "tten_bytes",
    "tten_from_bytes",
    "save_chain",
    "load_chain",
    "save_model",
    "load_model",
    "read_pgm",
    "write_pgm",
    "save_dataset",
    "load_dataset",
]

MAGIC = b"TTEN"
VERSION = 1


def tten_bytes(t):
    t = np.asarray(t, dtype=float)
    head = MAGIC + struct.pack("<BI", VERSION, t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    return head + t.reshape(-1, order="F").astype("<f8").tobytes()


def tten_from_bytes(buf):
    if buf[:4] != MAGIC:
        raise ValueError("not a TTEN stream (bad magic)")
    version, N = struct.unpack_from("<BI", buf, 4)
    if version != VERSION:
        raise ValueError(f"unsupported TTEN version {version}")
    off = 9
    dims = struct.unpack_from(f"<{N}Q", buf, off)
    off += 8 * N
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) - off != 8 * count:
        raise ValueError(f"TTEN payload holds {(len(buf) - off) // 8} values, expected {count}")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    return data.astype(float).reshape(dims, order="F")


def write_tten(path, t):
    Path(path).write_bytes(tten_bytes(t))


def read_tten(path):
    return tten_from_bytes(Path(path).read_bytes())


def save_chain(path, chain):
    """Zip container: ``header.json`` plus one ``core_<i>.tten`` per factor."""
    header = {
        "format": "ttchain",
        "n_factors": len(chain),
        "ranks": list(chain.ranks),
        "shape": list(chain.shape),
        "left_orthogonal": chain.left_orthogonal(),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("header.json", json.dumps(header, indent=2))
        for i, c in enumerate(chain.cores):
            zf.writestr(f"core_{i}.tten", tten_bytes(c))


def load_chain(path):
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("header.json"))
        cores = [tten_from_bytes(zf.read(f"core_{i}.tten")) for i in range(header["n_factors"])]
    chain = TTChain(cores)
    if list(chain.ranks) != header["ranks"]:
        raise ValueError("chain header ranks disagree with the stored cores")
    return chain


def save_model(path, chains, manifest, arrays=None):
    """Model directory: ``manifest.json``, ``branch_<b>.ttc`` chains, extra TTEN arrays."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for b, chain in enumerate(chains):
        save_chain(path / f"branch_{b}.ttc", chain)
    names = []
    for name, arr in (arrays or {}).items():
        write_tten(path / f"{name}.tten", arr)
        names.append(name)
    manifest = dict(manifest, n_branches=len(chains), arrays=names)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))


def load_model(path):
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    chains = [load_chain(path / f"branch_{b}.ttc") for b in range(manifest["n_branches"])]
    arrays = {name: read_tten(path / f"{name}.tten") for name in manifest.get("arrays", [])}
    return chains, manifest, arrays


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _pgm_tokens(buf):
    pos = 0
    while True:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        yield buf[start:pos], pos


def read_pgm(path):
    """8-bit grayscale PGM (P5 binary or P2 ASCII) scaled to ``[0, 1]``."""
    buf = Path(path).read_bytes()
    tokens = _pgm_tokens(buf)
    magic, _ = next(tokens)
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"{path}: not a grayscale PGM")
    width = int(next(tokens)[0])
    height = int(next(tokens)[0])
    maxval_tok, pos = next(tokens)
    maxval = int(maxval_tok)
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    if magic == b"P5":
        raw = np.frombuffer(buf, dtype=np.uint8, count=width * height, offset=pos + 1)
    else:
        raw = np.array(buf[pos:].split()[: width * height], dtype=np.int64)
    if raw.size != width * height:
        raise ValueError(f"{path}: truncated image data")
    return raw.reshape(height, width).astype(float) / maxval


def write_pgm(path, img):
    img = np.clip(np.rint(np.asarray(img, dtype=float) * 255), 0, 255).astype(np.uint8)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def save_dataset(path, data):
    """TTEN directory: one file per sample plus ``labels.csv`` (filename,class)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(data))))
    rows = []
    for i in range(len(data)):
        name = f"sample_{i:0{width}d}.tten"
        write_tten(path / name, data.X[i])
        rows.append((name, data.y[i]))
    with open(path / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["filename", "class"])
        w.writerows(rows)


def _label(value):
    try:
        return int(value)
    except ValueError:
        return value


def load_dataset(source, reshape=None):
    """Load a TTEN directory (with ``labels.csv``) or a folder of per-class PGM images.

    Samples are ordered by filename (lexicographic). ``reshape`` reinterprets
    every sample with a new shape in first-mode-fastest order.
    """
    source = Path(source)
    if not source.is_dir():
        raise FileNotFoundError(f"dataset source {source} is not a directory")
    labels_file = source / "labels.csv"
    if labels_file.exists():
        with open(labels_file, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if rows and rows[0][:2] == ["filename", "class"]:
            rows = rows[1:]
        rows.sort(key=lambda r: r[0])
        names = [r[0] for r in rows]
        X = [read_tten(source / n) for n in names]
        y = [_label(r[1]) for r in rows]
    else:
        class_dirs = sorted(d for d in source.iterdir() if d.is_dir())
        if not class_dirs:
            if any(source.glob("*.tten")):
                raise FileNotFoundError(f"{source}: missing labels.csv")
            raise FileNotFoundError(f"{source}: no labels.csv and no class subdirectories")
        names, X, y = [], [], []
        for d in class_dirs:
            for f in sorted(d.glob("*.pgm")):
                names.append(os.path.join(d.name, f.name))
                X.append(read_pgm(f))
                y.append(_label(d.name))
    if not X:
        raise ValueError(f"{source}: no samples found")
    shapes = {x.shape for x in X}
    if len(shapes) != 1:
        raise ValueError(f"{source}: samples have differing shapes {sorted(shapes)}")
    data = LabeledTensorSet(np.stack(X), np.asarray(y), names)
    return data.reshape(reshape) if reshape is not None else data
