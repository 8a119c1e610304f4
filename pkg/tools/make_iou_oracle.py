#!/usr/bin/env python3
"""Generate the committed Monte-Carlo oracle for rotated-box IoU.

Independent of the library's clipping code: for each random box pair, points
are sampled inside box A with a stratified jittered grid (1000x1000 = 1e6
samples), tested against box B with a direct inverse-rotation membership
check, and the intersection area is areaA * hit fraction.  The 3D IoU uses
the exact vertical-interval overlap times the Monte-Carlo BEV intersection.

Writes tests/data/iou_mc_oracle.json.
"""

import json
import os

import numpy as np

N_PAIRS = 500
GRID = 1000  # GRID^2 = 1e6 samples per pair


def sample_pair(rng):
    box_a = {
        "center": [0.0, float(rng.uniform(-1.0, 1.5)), 0.0],
        "dims": [float(rng.uniform(1.0, 3.0)),   # h
                 float(rng.uniform(0.8, 5.0)),   # w
                 float(rng.uniform(0.8, 5.0))],  # l
        "yaw": float(rng.uniform(-np.pi, np.pi)),
    }
    radius = float(rng.uniform(0.0, 4.0))
    theta = float(rng.uniform(0.0, 2 * np.pi))
    box_b = {
        "center": [radius * np.cos(theta), float(rng.uniform(-1.0, 1.5)),
                   radius * np.sin(theta)],
        "dims": [float(rng.uniform(1.0, 3.0)),
                 float(rng.uniform(0.8, 5.0)),
                 float(rng.uniform(0.8, 5.0))],
        "yaw": float(rng.uniform(-np.pi, np.pi)),
    }
    return box_a, box_b


def mc_bev_intersection(box_a, box_b, rng):
    _, wa, la = box_a["dims"]
    _, wb, lb = box_b["dims"]
    # Stratified jittered samples in A's local rectangle.
    edges_u = (np.arange(GRID) + rng.random(GRID)) / GRID * la - la / 2
    edges_v = (np.arange(GRID) + rng.random(GRID)) / GRID * wa - wa / 2
    uu, vv = np.meshgrid(edges_u, edges_v, indexing="ij")
    u = uu.ravel()
    v = vv.ravel()
    # Local (u, v) -> world (x, z) with the row-vector convention
    # world = local @ [[c, -s], [s, c]] + center.
    ca, sa = np.cos(box_a["yaw"]), np.sin(box_a["yaw"])
    x = u * ca + v * sa + box_a["center"][0]
    z = -u * sa + v * ca + box_a["center"][2]
    # Membership in B: inverse rotation of the offset.
    cb, sb = np.cos(box_b["yaw"]), np.sin(box_b["yaw"])
    dx = x - box_b["center"][0]
    dz = z - box_b["center"][2]
    lu = dx * cb - dz * sb
    lv = dx * sb + dz * cb
    inside = (np.abs(lu) <= lb / 2) & (np.abs(lv) <= wb / 2)
    return wa * la * inside.mean()


def y_overlap(box_a, box_b):
    top_a = box_a["center"][1] - box_a["dims"][0]
    top_b = box_b["center"][1] - box_b["dims"][0]
    return max(0.0, min(box_a["center"][1], box_b["center"][1])
               - max(top_a, top_b))


def main():
    rng = np.random.default_rng(20260824)
    pairs = []
    for _ in range(N_PAIRS):
        box_a, box_b = sample_pair(rng)
        inter = mc_bev_intersection(box_a, box_b, rng)
        area_a = box_a["dims"][1] * box_a["dims"][2]
        area_b = box_b["dims"][1] * box_b["dims"][2]
        bev = inter / (area_a + area_b - inter)
        dy = y_overlap(box_a, box_b)
        inter3 = inter * dy
        vol_a = area_a * box_a["dims"][0]
        vol_b = area_b * box_b["dims"][0]
        iou3 = inter3 / (vol_a + vol_b - inter3)
        pairs.append({"box_a": box_a, "box_b": box_b,
                      "bev_iou": bev, "iou_3d": iou3})
    out = os.path.join(os.path.dirname(__file__), "..",
                       "tests", "data", "iou_mc_oracle.json")
    with open(out, "w") as f:
        json.dump({"n_samples_per_pair": GRID * GRID, "pairs": pairs}, f,
                  indent=1)
    print(f"wrote {len(pairs)} pairs to {os.path.normpath(out)}")


if __name__ == "__main__":
    main()
