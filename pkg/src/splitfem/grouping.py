"""Cluster scalar samples under the relative metric r(x, v) = |x - v| / |v|.

Nearest-generator assignment alternates with centroid updates until an
assignment pass moves no sample.  Splitting a sample set this way keeps the
per-group dominance ratio small, so each group's fixed-point run converges
in a handful of iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GroupingError(ValueError):
    """A sample or intermediate center had zero magnitude."""


@dataclass
class GroupingResult:
    centers: np.ndarray
    membership: np.ndarray     # sample index -> group index
    per_group_rho: np.ndarray  # max over members of |x - center| / |center|
    iterations_used: int
    converged: bool

    @property
    def num_groups(self) -> int:
        return len(self.centers)

    def members(self, g: int) -> np.ndarray:
        return np.where(self.membership == g)[0]

    def to_csv(self, path, samples):
        """(group, size, region_min, region_max, center, rho) rows."""
        samples = np.asarray(samples, dtype=float)
        lines = ["group,size,region_min,region_max,center,rho"]
        for g in range(self.num_groups):
            vals = samples[self.membership == g]
            lines.append(
                f"{g + 1},{len(vals)},{vals.min():.6g},{vals.max():.6g},"
                f"{self.centers[g]:.6g},{self.per_group_rho[g]:.4f}"
            )
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
        return text


def _relative_distance(x, centers):
    return np.abs(x - centers) / np.abs(centers)


def group_samples(W, n_c: int, iter_max: int = 200, initial_centers=None) -> GroupingResult:
    """Partition samples into n_c groups by relative-metric centroid updates.

    Centers start linearly spaced over [min(W), max(W)] (midpoint for a
    single group) unless explicit initial centers are given.  Arg-min ties
    go to the smaller group index; a group left empty by a pass is re-seeded
    with the sample worst fitted to its current center.
    """
    W = np.asarray(W, dtype=float)
    n_s = len(W)
    if n_c < 1:
        raise ValueError(f"need at least one center, got {n_c}")
    if n_s < n_c:
        raise ValueError(f"need at least {n_c} samples, got {n_s}")
    if np.any(W == 0.0):
        raise GroupingError("samples must have magnitude greater than zero")

    if initial_centers is not None:
        centers = np.asarray(initial_centers, dtype=float).copy()
        if len(centers) != n_c:
            raise ValueError("initial centers must match n_c")
    elif n_c == 1:
        centers = np.array([0.5 * (W.min() + W.max())])
    else:
        centers = np.linspace(W.min(), W.max(), n_c)
    if np.any(centers == 0.0):
        raise GroupingError("centers must have magnitude greater than zero")

    membership = np.full(n_s, -1, dtype=np.int64)
    converged = False
    iterations = 0
    for iterations in range(1, iter_max + 1):
        transfers = 0
        for i in range(n_s):
            r = _relative_distance(W[i], centers)
            g = int(np.argmin(r))   # argmin takes the smallest index on ties
            if g != membership[i]:
                membership[i] = g
                transfers += 1
        for g in range(n_c):
            mask = membership == g
            if mask.any():
                centers[g] = W[mask].mean()
            else:
                worst = int(np.argmax(_relative_distance(W, centers[membership])))
                membership[worst] = g
                centers[g] = W[worst]
                transfers += 1
        if np.any(centers == 0.0):
            raise GroupingError("an updated center reached zero magnitude")
        if transfers == 0:
            converged = True
            break

    rho = np.zeros(n_c)
    for g in range(n_c):
        vals = W[membership == g]
        rho[g] = _relative_distance(vals, centers[g]).max()
    return GroupingResult(centers, membership, rho, iterations, converged)
