"""Raster mask files: binary PGM for planar masks, 0/1 text for 1D and 3D.

A planar mask ``m[i, j]`` (``i`` along ``x_1``, ``j`` along ``x_2``) is stored
as an image whose columns follow ``x_1`` and whose rows run from the top
(largest ``x_2``) down, so the file looks like the set drawn in the plane.
"""

from __future__ import annotations

import re

import numpy as np


class MaskFormatError(ValueError):
    pass


def write_pgm(mask: np.ndarray, path):
    """Binary P5 image, maxval 255: 0 for OUT, 255 for IN."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise MaskFormatError(f"PGM masks are planar, got {mask.ndim} axes")
    img = np.where(mask.T[::-1], 255, 0).astype(np.uint8)
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm`; pixels at or above half of maxval count as IN."""
    with open(path, "rb") as fh:
        data = fh.read()
    # header: magic, width, height, maxval, separated by whitespace and comments
    tokens = []
    pos = 0
    token_re = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")
    for _ in range(4):
        m = token_re.match(data, pos)
        if m is None:
            raise MaskFormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise MaskFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    if maxval >= 256:
        raise MaskFormatError(f"{path}: 16-bit PGM is not supported")
    pos += 1
    if len(data) - pos < rows * cols:
        raise MaskFormatError(f"{path}: expected {rows * cols} pixels, found {max(len(data) - pos, 0)}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos)
    img = pixels.reshape(rows, cols)
    return (img[::-1].T >= (maxval + 1) // 2).copy()


def write_mask_text(mask: np.ndarray, path):
    """0/1 text: one value per line in 1D, one line per row and blank lines between slices in 3D."""
    mask = np.asarray(mask, dtype=bool).astype(np.uint8)
    with open(path, "w") as fh:
        if mask.ndim == 1:
            fh.write("".join(f"{v}\n" for v in mask))
        elif mask.ndim in (2, 3):
            slices = mask[None] if mask.ndim == 2 else mask
            blocks = ["\n".join(" ".join(str(v) for v in row) for row in sl) for sl in slices]
            fh.write("\n\n".join(blocks) + "\n")
        else:
            raise MaskFormatError(f"unsupported mask rank {mask.ndim}")


def read_mask_text(path) -> np.ndarray:
    """Inverse of :func:`write_mask_text`."""
    with open(path) as fh:
        text = fh.read()
    blocks = [b for b in re.split(r"\n\s*\n", text.strip()) if b.strip()]
    parsed = []
    for b in blocks:
        rows = [line.split() for line in b.strip().splitlines()]
        try:
            parsed.append(np.array([[int(v) for v in r] for r in rows]))
        except ValueError as err:
            raise MaskFormatError(f"{path}: {err}") from None
    if any(p.shape != parsed[0].shape for p in parsed) or not parsed:
        raise MaskFormatError(f"{path}: ragged mask")
    if not np.all(np.isin(np.concatenate([p.ravel() for p in parsed]), (0, 1))):
        raise MaskFormatError(f"{path}: entries must be 0 or 1")
    if len(parsed) == 1:
        arr = parsed[0]
        if arr.shape[1] == 1:
            return arr[:, 0].astype(bool)
        return arr.astype(bool)
    return np.stack(parsed).astype(bool)
