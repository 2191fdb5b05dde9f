"""Emulated FP8 (E4M3) quantization with tile/block scaling.

The 8-bit format is E4M3 with a sign bit, 4 exponent bits (bias 7) and
3 mantissa bits. There are no infinities; the two codes with all-ones
exponent and mantissa (0x7f, 0xff) are NaN and everything else is
finite, giving a maximum magnitude of 448. Encoding rounds to the
nearest representable value with ties-to-even and saturates at +-448.

Two scaling schemes are provided:

* ``quantize_row_tiles``  - one float32 scale per 1x128 row tile
  (activations); scales have shape ``[rows, ceil(cols/128)]``.
* ``quantize_blocks``     - one float32 scale per 128x128 block
  (weights); scales have shape ``[ceil(rows/128), ceil(cols/128)]``.

A scale is ``amax(tile)/448`` so the tile maximum maps exactly onto the
largest representable code; all-zero tiles get scale 1.0 to keep
dequantization well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

E4M3_MAX = 448.0
NAN_CODES = (0x7F, 0xFF)
SCALE_BLOCK = 128  # granularity of both scaling schemes, in elements


def _build_decode_table() -> np.ndarray:
    codes = np.arange(256)
    sign = np.where(codes >> 7, -1.0, 1.0)
    exp_field = (codes >> 3) & 0xF
    mant = (codes & 0x7).astype(np.float64)
    normal = np.ldexp(1.0 + mant / 8.0, exp_field - 7)
    subnormal = np.ldexp(mant / 8.0, -6)
    values = sign * np.where(exp_field == 0, subnormal, normal)
    values[list(NAN_CODES)] = np.nan
    return values.astype(np.float32)


DECODE_TABLE = _build_decode_table()


def decode(codes) -> np.ndarray:
    """Decode uint8 codes to float32. NaN codes decode to NaN."""
    return DECODE_TABLE[np.asarray(codes, dtype=np.uint8)]


def encode(values) -> np.ndarray:
    """Encode float values to E4M3 codes.

    Nearest representable value, ties-to-even, magnitudes clamped to
    448. Never emits a NaN code; non-finite input raises InvalidInput.
    """
    x = np.asarray(values, dtype=np.float32)
    if not np.all(np.isfinite(x)):
        raise InvalidInput("cannot encode non-finite values")
    sign = np.signbit(x)
    mag = np.minimum(np.abs(x.astype(np.float64)), E4M3_MAX)

    # mag = f * 2**e2 with f in [0.5, 1); the leading-bit exponent is
    # e2 - 1, floored at -6 where the format turns subnormal.
    _, e2 = np.frexp(mag)
    e = np.maximum(e2 - 1, -6)
    # Significand in units of the mantissa LSB (2**(e-3)); exact in
    # float64 because it is a multiplication by a power of two.
    q = np.rint(mag * np.exp2(3.0 - e)).astype(np.int64)
    carry = q >= 16
    e = e + carry
    q = np.where(carry, 8, q)

    exp_field = np.where(q >= 8, e + 7, 0)
    mant = np.where(q >= 8, q - 8, q)
    code = (sign.astype(np.int64) << 7) | (exp_field << 3) | mant
    return code.astype(np.uint8)


def ulp(values) -> np.ndarray:
    """Spacing of E4M3 codes around each value (unsigned)."""
    mag = np.abs(np.asarray(values, dtype=np.float64))
    _, e2 = np.frexp(mag)
    e = np.maximum(e2 - 1, -6)
    e = np.where(mag == 0.0, -6, e)
    return np.exp2(e - 3.0)


@dataclass(frozen=True)
class Fp8Tensor:
    """Row-major quantized payload, one byte per element."""

    codes: np.ndarray

    def __post_init__(self):
        if self.codes.dtype != np.uint8 or self.codes.ndim != 2:
            raise InvalidInput("codes must be a 2-D uint8 array")
        if not self.codes.flags.c_contiguous:
            object.__setattr__(self, "codes", np.ascontiguousarray(self.codes))

    @property
    def rows(self) -> int:
        return self.codes.shape[0]

    @property
    def cols(self) -> int:
        return self.codes.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape


def _check_finite_2d(matrix) -> np.ndarray:
    x = np.ascontiguousarray(matrix, dtype=np.float32)
    if x.ndim != 2:
        raise InvalidInput("expected a 2-D matrix")
    if x.shape[1] < 1:
        raise InvalidInput("matrix must have at least one column")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("matrix entries must be finite")
    return x


def num_blocks(n: int) -> int:
    return -(-n // SCALE_BLOCK)


def quantize_row_tiles(matrix) -> tuple[Fp8Tensor, np.ndarray]:
    """Quantize with one scale per 1x128 row tile.

    Returns (codes, scales) where scales has shape
    ``[rows, ceil(cols/128)]`` in float32. The trailing tile may be
    narrower than 128 when cols is not a multiple of 128.
    """
    x = _check_finite_2d(matrix)
    rows, cols = x.shape
    tiles = num_blocks(cols)
    codes = np.empty((rows, cols), dtype=np.uint8)
    scales = np.empty((rows, tiles), dtype=np.float32)
    for t in range(tiles):
        sl = slice(t * SCALE_BLOCK, min((t + 1) * SCALE_BLOCK, cols))
        amax = np.abs(x[:, sl]).max(axis=1)
        s = np.where(amax > 0, amax / np.float32(E4M3_MAX), np.float32(1.0))
        s = s.astype(np.float32)
        scales[:, t] = s
        codes[:, sl] = encode(x[:, sl] / s[:, None])
    return Fp8Tensor(codes), scales


def quantize_blocks(matrix) -> tuple[Fp8Tensor, np.ndarray]:
    """Quantize with one scale per 128x128 block.

    Returns (codes, scales) with scales shaped
    ``[ceil(rows/128), ceil(cols/128)]`` in float32.
    """
    x = _check_finite_2d(matrix)
    rows, cols = x.shape
    if rows < 1:
        raise InvalidInput("matrix must have at least one row")
    rb, cb = num_blocks(rows), num_blocks(cols)
    codes = np.empty((rows, cols), dtype=np.uint8)
    scales = np.empty((rb, cb), dtype=np.float32)
    for i in range(rb):
        rsl = slice(i * SCALE_BLOCK, min((i + 1) * SCALE_BLOCK, rows))
        for j in range(cb):
            csl = slice(j * SCALE_BLOCK, min((j + 1) * SCALE_BLOCK, cols))
            block = x[rsl, csl]
            amax = np.abs(block).max()
            s = np.float32(amax / np.float32(E4M3_MAX)) if amax > 0 else np.float32(1.0)
            scales[i, j] = s
            codes[rsl, csl] = encode(block / s)
    return Fp8Tensor(codes), scales


def dequant(codes, scale) -> np.ndarray:
    """decode(code) * scale in float32. scale must be positive."""
    s = np.asarray(scale, dtype=np.float32)
    if np.any(s <= 0):
        raise InvalidInput("scale must be positive")
    return decode(codes) * s
