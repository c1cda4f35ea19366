"""Independent reference implementations used to check the package.

Everything in this module is written directly from the published formulas
(scalar math, degrees where the formulas use degrees) or as brute force, so
that a bug in the package cannot hide in a shared code path.
"""

from __future__ import annotations

import itertools
import math


# ---------------------------------------------------------------------------
# sRGB -> CIELAB, straight from the IEC/CIE definitions (D65, 2 degrees).
# ---------------------------------------------------------------------------

def srgb_to_lab_reference(r: int, g: int, b: int) -> tuple[float, float, float]:
    def linearize(u8):
        u = u8 / 255.0
        return u / 12.92 if u <= 0.04045 else ((u + 0.055) / 1.055) ** 2.4

    rl, gl, bl = linearize(r), linearize(g), linearize(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl

    def f(t):
        return t ** (1.0 / 3.0) if t > (6.0 / 29.0) ** 3 else t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0

    fx = f(x / 0.95047)
    fy = f(y / 1.0)
    fz = f(z / 1.08883)
    return 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)


# ---------------------------------------------------------------------------
# CIEDE2000, the degree-based formulation of CIE Technical Report 142.
# ---------------------------------------------------------------------------

def _cosd(deg):
    return math.cos(math.radians(deg))


def _sind(deg):
    return math.sin(math.radians(deg))


def ciede2000_reference(lab1, lab2) -> float:
    l1, a1, b1 = lab1
    l2, a2, b2 = lab2

    c1 = math.hypot(a1, b1)
    c2 = math.hypot(a2, b2)
    c_bar = 0.5 * (c1 + c2)
    g = 0.5 * (1.0 - math.sqrt(c_bar ** 7 / (c_bar ** 7 + 25.0 ** 7)))
    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = math.hypot(a1p, b1)
    c2p = math.hypot(a2p, b2)

    def hue(ap, bv):
        if ap == 0.0 and bv == 0.0:
            return 0.0
        h = math.degrees(math.atan2(bv, ap))
        return h + 360.0 if h < 0.0 else h

    h1p = hue(a1p, b1)
    h2p = hue(a2p, b2)

    dl = l2 - l1
    dc = c2p - c1p
    if c1p * c2p == 0.0:
        dh_deg = 0.0
    elif abs(h2p - h1p) <= 180.0:
        dh_deg = h2p - h1p
    elif h2p - h1p > 180.0:
        dh_deg = h2p - h1p - 360.0
    else:
        dh_deg = h2p - h1p + 360.0
    dh = 2.0 * math.sqrt(c1p * c2p) * _sind(dh_deg / 2.0)

    l_bar = 0.5 * (l1 + l2)
    cp_bar = 0.5 * (c1p + c2p)
    if c1p * c2p == 0.0:
        h_bar = h1p + h2p
    elif abs(h1p - h2p) <= 180.0:
        h_bar = 0.5 * (h1p + h2p)
    elif h1p + h2p < 360.0:
        h_bar = 0.5 * (h1p + h2p + 360.0)
    else:
        h_bar = 0.5 * (h1p + h2p - 360.0)

    t = (1.0
         - 0.17 * _cosd(h_bar - 30.0)
         + 0.24 * _cosd(2.0 * h_bar)
         + 0.32 * _cosd(3.0 * h_bar + 6.0)
         - 0.20 * _cosd(4.0 * h_bar - 63.0))
    d_theta = 30.0 * math.exp(-(((h_bar - 275.0) / 25.0) ** 2))
    r_c = 2.0 * math.sqrt(cp_bar ** 7 / (cp_bar ** 7 + 25.0 ** 7))
    s_l = 1.0 + 0.015 * (l_bar - 50.0) ** 2 / math.sqrt(20.0 + (l_bar - 50.0) ** 2)
    s_c = 1.0 + 0.045 * cp_bar
    s_h = 1.0 + 0.015 * cp_bar * t
    r_t = -_sind(2.0 * d_theta) * r_c

    return math.sqrt((dl / s_l) ** 2
                     + (dc / s_c) ** 2
                     + (dh / s_h) ** 2
                     + r_t * (dc / s_c) * (dh / s_h))


# ---------------------------------------------------------------------------
# Brute-force k-means optimum: enumerate every partition of the points into
# exactly k non-empty blocks and take the cheapest one.  Feasible for n <= 8.
# ---------------------------------------------------------------------------

def _partitions_into_k(n: int, k: int):
    """Yield assignments (tuple of block ids) with exactly k non-empty blocks.

    Restricted-growth strings: element 0 is always in block 0 and element i
    may open at most one new block, so each set partition appears once.
    """
    def rec(i, used, prefix):
        if n - i < k - used:
            return
        if i == n:
            if used == k:
                yield tuple(prefix)
            return
        for block in range(min(used + 1, k)):
            prefix.append(block)
            yield from rec(i + 1, max(used, block + 1), prefix)
            prefix.pop()

    yield from rec(0, 0, [])


def optimal_kmeans_inertia(points, k: int) -> float:
    """Exact minimum within-cluster sum of squared distances."""
    n = len(points)
    dims = len(points[0])
    best = math.inf
    for assign in _partitions_into_k(n, k):
        total = 0.0
        for block in range(k):
            members = [points[i] for i in range(n) if assign[i] == block]
            mean = [sum(p[d] for p in members) / len(members) for d in range(dims)]
            total += sum(sum((p[d] - mean[d]) ** 2 for d in range(dims)) for p in members)
        if total < best:
            best = total
    return best


def kmeans_inertia_of(points, centroids) -> float:
    """Inertia of assigning each point to its nearest centroid."""
    total = 0.0
    for p in points:
        total += min(sum((pd - cd) ** 2 for pd, cd in zip(p, c)) for c in centroids)
    return total


# ---------------------------------------------------------------------------
# Central finite differences for gradient checking.
# ---------------------------------------------------------------------------

def central_difference(loss_fn, params, name, index, h=1e-5) -> float:
    """d loss / d params[name].flat[index], via two-sided differences.

    Mutates the array in place and restores it, so callers can reuse params.
    """
    flat = params[name].reshape(-1)
    saved = flat[index]
    flat[index] = saved + h
    up = loss_fn(params)
    flat[index] = saved - h
    down = loss_fn(params)
    flat[index] = saved
    return (up - down) / (2.0 * h)


def exhaustive_codes(bins: int):
    """All (li, ai, bi) index triples for a bins^3 grid."""
    return itertools.product(range(bins), repeat=3)
