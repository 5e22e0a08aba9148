"""Depth / normal-map file formats and the flat key-value config format.

Key-value documents hold one ``key = value`` (or ``key: value``) pair per
line; ``#`` starts a comment.  Intrinsics use the keys ``fx fy cx cy`` and
optionally ``width height``.

PFM files follow the usual convention: scanlines are stored bottom-to-top
and a negative scale marks little-endian data.  In memory every raster is
top-down.
"""

from __future__ import annotations

import io as _io
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidInputError
from .geometry import CameraIntrinsics, DepthImage, NormalMap

DEFAULT_PNG16_SCALE = 256.0
# Refuse headers that would need more than this many pixels.
MAX_PIXELS = 1 << 28

_PFM_HEADER = re.compile(rb"(P[Ff])\s+(\d+)\s+(\d+)\s+(\S+)\s")


@dataclass(frozen=True)
class DepthFileSpec:
    format: str = "png16"
    scale: float = DEFAULT_PNG16_SCALE
    zero_is_invalid: bool = True

    def __post_init__(self) -> None:
        if self.format not in ("png16", "pfm"):
            raise InvalidInputError(f"unknown depth format {self.format!r}; expected png16 or pfm")
        if self.format == "png16" and not self.scale > 0:
            raise InvalidInputError(f"png16 scale must be positive, got {self.scale}")


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- key-value documents -----------------------------------------------------

def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"([A-Za-z_][\w.]*)\s*[=:]\s*(.*)$", line)
        if not m or not m.group(2):
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key = m.group(1).lower()
        if key in out:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        out[key] = m.group(2).strip()
    return out


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise FormatError(f"{path}: not a UTF-8 text document") from None
    return parse_kv(text)


def format_kv(values: dict[str, object]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def intrinsics_from_kv(cfg: dict[str, str]) -> tuple[CameraIntrinsics, tuple[int, int] | None]:
    """Intrinsics plus the optional ``(width, height)`` the file declares."""
    try:
        K = CameraIntrinsics(*(float(cfg[k]) for k in ("fx", "fy", "cx", "cy")))
    except KeyError as exc:
        raise FormatError(f"intrinsics missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise FormatError(f"bad intrinsics value: {exc}") from None
    size = None
    if "width" in cfg or "height" in cfg:
        try:
            size = (int(cfg["width"]), int(cfg["height"]))
        except (KeyError, ValueError):
            raise FormatError("intrinsics must give both integer width and height, or neither") from None
    return K, size


def read_intrinsics(path: str | os.PathLike) -> tuple[CameraIntrinsics, tuple[int, int] | None]:
    return intrinsics_from_kv(read_kv(path))


def write_intrinsics(path: str | os.PathLike, K: CameraIntrinsics, size: tuple[int, int] | None = None) -> None:
    values: dict[str, object] = {"fx": repr(K.fx), "fy": repr(K.fy), "cx": repr(K.cx), "cy": repr(K.cy)}
    if size is not None:
        values["width"], values["height"] = size
    atomic_write(path, format_kv(values).encode())


# -- PFM ---------------------------------------------------------------------

def decode_pfm(data: bytes) -> np.ndarray:
    """Top-down float32 array, (H, W) for ``Pf`` or (H, W, 3) for ``PF``."""
    m = _PFM_HEADER.match(data)
    if not m:
        raise FormatError("not a PFM file: bad or truncated header")
    tag, width, height, scale_txt = m.groups()
    width, height = int(width), int(height)
    try:
        scale = float(scale_txt)
    except ValueError:
        raise FormatError(f"PFM scale is not a number: {scale_txt!r}") from None
    if scale == 0 or not np.isfinite(scale):
        raise FormatError(f"PFM scale must be finite and non-zero, got {scale}")
    if width <= 0 or height <= 0 or width * height > MAX_PIXELS:
        raise FormatError(f"PFM dimensions {width}x{height} are out of range")
    channels = 3 if tag == b"PF" else 1
    payload = data[m.end():]
    expected = width * height * channels * 4
    if len(payload) != expected:
        raise FormatError(f"PFM payload is {len(payload)} bytes, header implies {expected}")
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return np.flipud(arr.reshape(shape)).copy()


def encode_pfm(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        tag = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        tag = b"PF"
    else:
        raise FormatError(f"PFM stores 1 or 3 channels, got array of shape {arr.shape}")
    height, width = arr.shape[:2]
    header = b"%s\n%d %d\n-1.0\n" % (tag, width, height)
    body = np.ascontiguousarray(np.flipud(arr), dtype="<f4").tobytes()
    return header + body


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    return decode_pfm(Path(path).read_bytes())


def write_pfm(path: str | os.PathLike, arr: np.ndarray) -> None:
    atomic_write(path, encode_pfm(arr))


# -- depth images ------------------------------------------------------------

def _read_png16(path: str | os.PathLike) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise FormatError(f"{path}: expected a PNG file, got {img.format}")
            if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
                raise FormatError(
                    f"{path}: expected single-channel 16-bit PNG, got mode {img.mode} "
                    f"with {len(img.getbands())} channel(s)"
                )
            raw = np.asarray(img)
    except (OSError, SyntaxError, Image.DecompressionBombError) as exc:
        raise FormatError(f"{path}: cannot decode PNG: {exc}") from None
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected a single channel, got shape {raw.shape}")
    if raw.min(initial=0) < 0 or raw.max(initial=0) > 0xFFFF:
        raise FormatError(f"{path}: sample values exceed 16 bits")
    return raw.astype(np.uint16)


def encode_png16(raw: np.ndarray) -> bytes:
    buf = _io.BytesIO()
    Image.fromarray(np.ascontiguousarray(raw, dtype=np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


def read_depth(path: str | os.PathLike, spec: DepthFileSpec = DepthFileSpec()) -> DepthImage:
    """Load a depth image in meters.

    png16 stores ``round(depth * scale)``; raw 0 is invalid when
    ``spec.zero_is_invalid``.  Without the flag raw 0 still decodes to a
    zero depth, which :class:`DepthImage` rejects as non-positive.  For pfm,
    non-finite or non-positive values are invalid.
    """
    if spec.format == "png16":
        raw = _read_png16(path)
        depth = raw.astype(np.float64) / spec.scale
        valid = raw != 0 if spec.zero_is_invalid else np.ones(raw.shape, dtype=bool)
        return DepthImage(depth, valid)
    arr = read_pfm(path)
    if arr.ndim != 2:
        raise FormatError(f"{path}: depth PFM must be single-channel (Pf), got 3 channels")
    depth = arr.astype(np.float64)
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(depth) & (depth > 0)
    return DepthImage(np.where(valid, depth, 0.0), valid)


def write_depth(path: str | os.PathLike, Z: DepthImage, spec: DepthFileSpec = DepthFileSpec()) -> None:
    if spec.format == "png16":
        scaled = np.where(Z.valid, np.floor(Z.depth * spec.scale + 0.5), 0.0)
        if scaled.max(initial=0) > 0xFFFF:
            raise FormatError(
                f"depth {Z.depth[Z.valid].max():.3f} m does not fit 16 bits at scale {spec.scale}"
            )
        # A valid depth must not collapse onto the invalid sentinel.
        raw = np.where(Z.valid, np.maximum(scaled, 1.0), 0.0).astype(np.uint16)
        atomic_write(path, encode_png16(raw))
    else:
        write_pfm(path, np.where(Z.valid, Z.depth, np.nan).astype(np.float32))


# -- normal maps -------------------------------------------------------------

def encode_rgb8(n: NormalMap) -> np.ndarray:
    """Channel value ``floor((c + 1) / 2 * 255 + 0.5)``, x->R, y->G, z->B; invalid pixels black."""
    safe = np.where(n.valid[..., None], n.normals, -1.0)
    rgb = np.floor((np.clip(safe, -1.0, 1.0) + 1.0) / 2.0 * 255.0 + 0.5)
    return rgb.astype(np.uint8)


def write_normal_map(n: NormalMap, path: str | os.PathLike, encoding: str = "pfm3") -> None:
    if encoding == "rgb8":
        buf = _io.BytesIO()
        Image.fromarray(encode_rgb8(n), mode="RGB").save(buf, format="PNG")
        atomic_write(path, buf.getvalue())
    elif encoding == "pfm3":
        arr = np.where(n.valid[..., None], n.normals, np.nan).astype(np.float32)
        write_pfm(path, arr)
    else:
        raise InvalidInputError(f"unknown normal encoding {encoding!r}; expected rgb8 or pfm3")


def read_normal_map(path: str | os.PathLike) -> NormalMap:
    """Load a pfm3 normal map; pixels with any non-finite component are invalid."""
    arr = read_pfm(path)
    if arr.ndim != 3:
        raise FormatError(f"{path}: normal map PFM must have 3 channels (PF)")
    normals = arr.astype(np.float64)
    valid = np.isfinite(normals).all(axis=-1)
    normals[~valid] = np.nan
    return NormalMap(normals, valid)
