"""Regenerates the frozen reference tables in this directory.

    python gen_oracles.py

Written against the formulas directly (exact integer binomials, 60-digit
mpmath logs and quadrature) and shares no code with the Rust crate.
"""

import csv
import math
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60
HERE = Path(__file__).resolve().parent


def threshold(n, t, k, index_set, theta, l, eps):
    log_theta = mp.log(theta, 2)
    best, arg = None, None
    for u in sorted(index_set):
        r = (1 + mp.mpf(eps)) * k / (u * n * t) * (log_theta + u * mp.log(l, 2))
        if best is None or r > best:
            best, arg = r, u
    return best, arg


def threshold_curves():
    n, t, eps = 10, 90, 1
    rows = []
    for k in (6, 12, 24, 36):
        theta = math.comb(n * t, k)
        for l in range(1, 65):
            r, u = threshold(n, t, k, range(1, k + 1), theta, l, eps)
            rows.append(("overall", k, "", "", l, mp.nstr(r, 25), u))
    for k_t in (2, 4, 8, 12):
        k_s = 3
        k = k_s * k_t
        theta = math.comb(n, k_s) * math.comb(t, k_t)
        us = {a * b for a in range(1, k_t + 1) for b in range(1, k_s + 1)}
        for l in range(1, 65):
            r, u = threshold(n, t, k, us, theta, l, eps)
            rows.append(("structured", k, k_s, k_t, l, mp.nstr(r, 25), u))
    with open(HERE / "threshold_curves.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["model", "k", "k_s", "k_t", "l", "R", "u"])
        w.writerows(rows)


def phi(x):
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def dead_zone_cells(l, gamma):
    """Pieces (a, b, value) of the dead-zone quantizer on the real line."""
    gamma = mp.mpf(gamma)
    delta = 2 * gamma / l
    levels = [-gamma + (j - mp.mpf(1) / 2) * delta for j in range(1, l + 1)]
    cuts = {-gamma + j * delta for j in range(l + 1)}
    cuts |= {-delta / 2, delta / 2}
    cuts = sorted(c for c in cuts if -gamma <= c <= gamma)
    pieces = [(-mp.inf, -gamma, levels[0])]
    for a, b in zip(cuts, cuts[1:]):
        mid = (a + b) / 2
        if abs(mid) < delta / 2:
            v = mp.mpf(0)
        else:
            j = min(int(mp.floor((mid + gamma) / delta)), l - 1)
            v = levels[j]
        pieces.append((a, b, v))
    pieces.append((gamma, mp.inf, levels[-1]))
    return pieces


def gaussian_distortion(pieces):
    return mp.fsum(mp.quad(lambda x, v=v: (x - v) ** 2 * phi(x), [a, b]) for a, b, v in pieces)


def uniform_one_bit_pieces(gamma):
    """Two-level mid-rise quantizer with levels ±gamma/2, zero rounds up."""
    g = mp.mpf(gamma)
    return [(-mp.inf, 0, -g / 2), (0, mp.inf, g / 2)]


def distortion_table():
    gamma = 2
    rows = []
    for l in (1, 2, 3, 4, 8, 10, 16, 103, 1040):
        e = gaussian_distortion(dead_zone_cells(l, gamma))
        rows.append(("dead-zone", l, gamma, mp.nstr(e, 25)))
    e = gaussian_distortion(uniform_one_bit_pieces(gamma))
    rows.append(("uniform", 2, gamma, mp.nstr(e, 25)))
    with open(HERE / "gaussian_distortion.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["quantizer", "l", "gamma", "per_nonzero_mse"])
        w.writerows(rows)


if __name__ == "__main__":
    threshold_curves()
    distortion_table()
