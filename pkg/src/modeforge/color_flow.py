"""sRGB to CIE Lab conversion and pseudo-temporal snapshot assembly.

A static image has no time axis, so a flow is induced by converting the
image to Lab and stacking flattened channel planes, in a fixed permutation
sequence, as the columns of a snapshot matrix. Downstream DMD then treats
the plane sequence as consecutive states of a dynamical system.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image

# sRGB -> XYZ (linear RGB, D65). Full-precision matrix; the white point is
# taken as the row sums so that (1,1,1) maps to the white point exactly.
M_RGB2XYZ = np.array([
    [0.41239079926595934, 0.35758433938387800, 0.18048078840183430],
    [0.21263900587151027, 0.71516867876775600, 0.07219231536073371],
    [0.01933081871559182, 0.11919477979462598, 0.95053215224966070],
])
WHITE_POINT = M_RGB2XYZ.sum(axis=1)
M_XYZ2RGB = np.linalg.inv(M_RGB2XYZ)

# Lab f(t) breakpoint constants.
_DELTA = 6.0 / 29.0
_DELTA3 = _DELTA ** 3

DEFAULT_ORDER = ("L", "a", "b", "L", "b", "a")


@dataclass(frozen=True)
class LabImage:
    """Lab planes of one image, each of shape (height, width)."""

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def height(self):
        return self.L.shape[0]

    @property
    def width(self):
        return self.L.shape[1]

    def plane(self, name):
        if name not in ("L", "a", "b"):
            raise ValueError(f"unknown Lab plane {name!r}, expected 'L', 'a' or 'b'")
        return getattr(self, name)


@dataclass(frozen=True)
class SnapshotMatrix:
    """Pseudo-temporal snapshot set.

    data is N x M with N = width * height pixels per plane and M = number of
    snapshots; column j is the row-major flattening of plane order[j].
    """

    data: np.ndarray
    order: tuple
    height: int
    width: int

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.data.shape[1]


def read_image(path):
    """Decode a PNG or JPEG file to an 8-bit RGB array.

    Grayscale inputs are expanded to three channels and alpha channels are
    dropped, so the result is always (height, width, 3) uint8.
    """
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.uint8)


def _validate_rgb(image):
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must have positive height and width")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected 8-bit sRGB (uint8), got dtype {arr.dtype}")
    return arr


def _f(t):
    return np.where(t > _DELTA3, np.cbrt(t), t / (3.0 * _DELTA * _DELTA) + 4.0 / 29.0)


def _f_inv(t):
    return np.where(t > _DELTA, t ** 3, 3.0 * _DELTA * _DELTA * (t - 4.0 / 29.0))


def rgb_to_lab(image):
    """Convert an 8-bit sRGB image to a LabImage.

    Standard pipeline: gamma expansion, linear RGB to XYZ under D65, then the
    CIE Lab forward transform. L lands in [0, 100]; a and b are unbounded in
    principle, in practice within about +-128 for the sRGB gamut.

    Parameters
    ----------
    image : (H, W, 3) uint8 array

    Returns
    -------
    LabImage
    """
    arr = _validate_rgb(image)
    c = arr.astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ M_RGB2XYZ.T
    fx = _f(xyz[..., 0] / WHITE_POINT[0])
    fy = _f(xyz[..., 1] / WHITE_POINT[1])
    fz = _f(xyz[..., 2] / WHITE_POINT[2])
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return LabImage(L=L, a=a, b=b)


def lab_to_rgb(lab):
    """Invert rgb_to_lab back to an 8-bit sRGB array.

    Round-trips any 8-bit sRGB pixel to within +-1 per channel; out-of-gamut
    Lab values are clipped into range.
    """
    fy = (np.asarray(lab.L, dtype=np.float64) + 16.0) / 116.0
    fx = fy + np.asarray(lab.a, dtype=np.float64) / 500.0
    fz = fy - np.asarray(lab.b, dtype=np.float64) / 200.0
    xyz = np.stack([
        _f_inv(fx) * WHITE_POINT[0],
        _f_inv(fy) * WHITE_POINT[1],
        _f_inv(fz) * WHITE_POINT[2],
    ], axis=-1)
    lin = xyz @ M_XYZ2RGB.T
    lin = np.clip(lin, 0.0, None)
    srgb = np.where(lin <= 0.0031308, 12.92 * lin, 1.055 * lin ** (1.0 / 2.4) - 0.055)
    return (np.clip(srgb, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def build_snapshots(lab, order=DEFAULT_ORDER):
    """Assemble Lab planes into a snapshot matrix.

    Column j of the result is the row-major flattening of plane order[j].
    The default 6-plane order (L, a, b, L, b, a) gives X_a five columns, so
    truncation ranks up to J = 5 are supported.

    Parameters
    ----------
    lab : LabImage
    order : sequence of plane names drawn from {"L", "a", "b"}

    Returns
    -------
    SnapshotMatrix
    """
    order = tuple(order)
    if len(order) == 0:
        raise ValueError("snapshot order must be a non-empty sequence of plane names")
    cols = [lab.plane(name).astype(np.float64).ravel() for name in order]
    data = np.column_stack(cols)
    return SnapshotMatrix(data=data, order=order, height=lab.height, width=lab.width)
