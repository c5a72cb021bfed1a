#!/usr/bin/env python3
"""Writes the reference NIfTI-1 fixtures used by the reader tests.

Six single-file volumes of dims 4x3x2 (24 voxels), covering each supported
datatype in both byte orders. Values and scaling are chosen so every decoded
intensity is exactly representable in 32-bit floats:

  u8  : raw i in 0..23, slope 0 (unscaled)          -> v = i
  i16 : raw i-12, slope 2, intercept 1              -> v = 2*(i-12) + 1
  f32 : raw 0.5*i - 3.25, slope 1, intercept 0.25   -> v = 0.5*i - 3.0

The affine rows are srow_x = [2,0,0,-10], srow_y = [0,2,0,-20],
srow_z = [0,0,2,-30]. Output lands in crates/core/tests/fixtures/nifti/.
"""

import pathlib
import struct

DIMS = (4, 3, 2)
COUNT = DIMS[0] * DIMS[1] * DIMS[2]
OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/nifti"


def header(order, datatype, bitpix, slope, inter):
    buf = bytearray(352)
    struct.pack_into(order + "i", buf, 0, 348)
    struct.pack_into(order + "8h", buf, 40, 3, *DIMS, 1, 1, 1, 1)
    struct.pack_into(order + "h", buf, 70, datatype)
    struct.pack_into(order + "h", buf, 72, bitpix)
    struct.pack_into(order + "8f", buf, 76, *([1.0] * 8))
    struct.pack_into(order + "f", buf, 108, 352.0)
    struct.pack_into(order + "f", buf, 112, slope)
    struct.pack_into(order + "f", buf, 116, inter)
    struct.pack_into(order + "h", buf, 254, 1)  # sform_code
    struct.pack_into(order + "4f", buf, 280, 2.0, 0.0, 0.0, -10.0)
    struct.pack_into(order + "4f", buf, 296, 0.0, 2.0, 0.0, -20.0)
    struct.pack_into(order + "4f", buf, 312, 0.0, 0.0, 2.0, -30.0)
    buf[344:348] = b"n+1\0"
    return buf


def fixture(order, kind):
    if kind == "u8":
        buf = header(order, 2, 8, 0.0, 0.0)
        payload = struct.pack(f"{order}{COUNT}B", *range(COUNT))
    elif kind == "i16":
        buf = header(order, 4, 16, 2.0, 1.0)
        payload = struct.pack(f"{order}{COUNT}h", *(i - 12 for i in range(COUNT)))
    else:
        buf = header(order, 16, 32, 1.0, 0.25)
        payload = struct.pack(f"{order}{COUNT}f", *(0.5 * i - 3.25 for i in range(COUNT)))
    return bytes(buf) + payload


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for order, tag in (("<", "le"), (">", "be")):
        for kind in ("u8", "i16", "f32"):
            path = OUT / f"{kind}_{tag}.nii"
            path.write_bytes(fixture(order, kind))
            print(f"wrote {path}")


if __name__ == "__main__":
    main()
