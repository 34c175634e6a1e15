"""Writes the golden files used by the integration tests.

Everything here is computed with numpy and struct only, independently of the
Rust code. Rerun with `python3 generate.py` from this directory.
"""

import struct
import zlib
from fractions import Fraction

import numpy as np


def write_mrc(path, stack, pixel_size):
    nz, ny, nx = stack.shape
    h = bytearray(1024)
    struct.pack_into("<3i", h, 0, nx, ny, nz)
    struct.pack_into("<i", h, 12, 2)
    struct.pack_into("<3i", h, 28, nx, ny, nz)
    struct.pack_into("<3f", h, 40, nx * pixel_size, ny * pixel_size, nz * pixel_size)
    struct.pack_into("<3f", h, 52, 90.0, 90.0, 90.0)
    struct.pack_into("<3i", h, 64, 1, 2, 3)
    data = stack.astype("<f4")
    struct.pack_into("<3f", h, 76, data.min(), data.max(), data.astype(np.float64).mean())
    d64 = data.astype(np.float64)
    struct.pack_into("<f", h, 216, np.sqrt(((d64 - d64.mean()) ** 2).mean()))
    struct.pack_into("<i", h, 108, 20140)
    h[208:212] = b"MAP "
    h[212:216] = bytes([0x44, 0x44, 0, 0])
    with open(path, "wb") as f:
        f.write(bytes(h))
        f.write(data.tobytes())


def golden_mrc():
    k, r, c = np.meshgrid(np.arange(2), np.arange(8), np.arange(8), indexing="ij")
    stack = (k * 64 + r * 8 + c) * 0.125 - 4.0
    write_mrc("golden.mrc", stack, 1.5)


def linear_alpha_bar(steps=1000, b0=1e-4, b1=0.02):
    betas = b0 + (b1 - b0) * np.arange(steps) / (steps - 1)
    return np.concatenate([[1.0], np.cumprod(1.0 - betas)])


def exact_alpha_bar_final(steps=1000, b0=1e-4, b1=0.02):
    prod = Fraction(1)
    for i in range(steps):
        beta = b0 + (b1 - b0) * i / (steps - 1)
        prod *= 1 - Fraction(beta)
    return float(prod)


def silu(v):
    return v / (1.0 + np.exp(-v))


def embedding(t, dim):
    half = dim // 2
    w = 10.0 ** (-4.0 * np.arange(half) / (half - 1))
    return np.concatenate([np.sin(t * w), np.cos(t * w)])


def golden_mlp():
    rng = np.random.default_rng(2024)
    side, embed, hidden = 4, 6, 12
    n = side * side
    shapes = [(hidden, n + embed), (hidden, hidden), (n, hidden)]
    layers = [
        (rng.uniform(-0.4, 0.4, s).astype("<f4"), rng.uniform(-0.2, 0.2, s[0]).astype("<f4"))
        for s in shapes
    ]
    for version, name in [(1, "mlp_score.cssm"), (2, "mlp_eps.cssm")]:
        body = bytearray(b"CSSM")
        body += struct.pack("<4I", version, side, embed, len(layers))
        for w, b in layers:
            body += struct.pack("<2I", *w.shape)
            body += w.tobytes() + b.tobytes()
        body += struct.pack("<I", zlib.crc32(bytes(body)))
        with open(name, "wb") as f:
            f.write(bytes(body))

    abar = linear_alpha_bar()
    cases = []
    for t in [1, 17, 250, 999, 1000]:
        x = rng.uniform(-1, 1, n)
        h = np.concatenate([x, embedding(float(t), embed)])
        for i, (w, b) in enumerate(layers):
            h = w.astype(np.float64) @ h + b.astype(np.float64)
            if i < len(layers) - 1:
                h = silu(h)
        eps_score = -h / np.sqrt(1.0 - abar[t])
        cases.append(np.concatenate([[float(t)], x, h, eps_score]))
    np.asarray(cases, dtype="<f8").tofile("mlp_expected.bin")


if __name__ == "__main__":
    golden_mrc()
    golden_mlp()
    print("alpha_bar_T =", repr(exact_alpha_bar_final()))
