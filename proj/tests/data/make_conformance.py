#!/usr/bin/env python3
"""Writes the toy conformance archive with nothing but struct, so the C++
reader is checked against bytes it did not produce. Re-run only when the
format changes; test_io compares against the committed files."""
import os
import struct
import sys

out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "conformance", "toy")
os.makedirs(out, exist_ok=True)
W, H = 3, 2


def f32(values):
    return struct.pack("<%df" % len(values), *values)


def write(name, data):
    with open(os.path.join(out, name), "wb") as f:
        f.write(data)


for v in range(2):
    pts, conf = [], []
    for i in range(W * H):
        c = 0.0 if (v == 0 and i == 4) else 1.0 + 0.5 * i
        conf.append(c)
        pts += [0.125 * i, v - 0.25 * i, 1.0 + 0.5 * i] if c > 0 else [0.0, 0.0, 0.0]
    write("view%d_points0.bin" % v, f32(pts))
    write("view%d_confidence0.bin" % v, f32(conf))

write("view0_mask.bin", bytes([1, 1, 0, 0, 1, 0]))
write("view1_corners.bin", f32([0.5, 0.25, 1.5, 0.25, 0.5, 1.25, 1.5, 1.25]))
write("matches.bin", f32([0, 0, 1, 0, 1, 2, 1, 2, 1, 0.5]))
write("scores.bin", f32([0, 0.75, 0.75, 0]))

manifest = (
    "rigrecon-archive 1\n"
    "byte-order little-endian\n"
    "board 2 2 0.05\n"
    "view 0 camera 0 pose 0 width 3 height 2 estimates 1 mask\n"
    "intrinsics 0 4 4 1 0.5\n"
    "view 1 camera 0 pose 1 width 3 height 2 estimates 1 corners\n"
    "pair 0 1 2\n"
)
with open(os.path.join(out, "manifest.txt"), "w", newline="\n") as f:
    f.write(manifest)
