"""Dense finite-volume eigen-diagnostics: IPR profiles, level-spacing
ratios, and mobility-edge scans against the +/- ||H0||_1 markers.

Classification of localized vs extended states is always by IPR
contrast between energy bins, never by an absolute threshold:
finite-volume IPRs drift with size, their ratios are stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._stats import run_indexed
from .disorder import DisorderModel, sample_potential
from .lattice import Cube, SparseSet
from .operators import AssembledOperator, KernelOperator, assemble_finite_volume, s_norm

DENSE_CAP = 4096


def ipr(psi: np.ndarray) -> float:
    """Inverse participation ratio sum |psi|^4 of a normalized vector."""
    psi = np.asarray(psi)
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"vector not normalized: |psi| = {norm}")
    return float(np.sum(np.abs(psi) ** 4))


@dataclass(frozen=True)
class EigenReport:
    eigenvalues: np.ndarray
    iprs: np.ndarray
    volume: int
    realization: int


def eigensystem(op: AssembledOperator, realization: int = 0, cap: int = DENSE_CAP) -> EigenReport:
    """Full symmetric eigendecomposition with per-state IPRs."""
    n = op.size
    if n > cap:
        raise ValueError(
            f"volume {n} exceeds the dense-diagonalization cap {cap}; "
            "reduce the volume (Green-function tools handle large ones)"
        )
    dense = op.matrix.toarray()
    if np.iscomplexobj(dense):
        dense = dense.real
    values, vectors = np.linalg.eigh(dense)
    residual = np.max(np.linalg.norm(dense @ vectors - vectors * values, axis=0))
    if residual > 1e-8:
        raise RuntimeError(f"eigendecomposition residual {residual} above 1e-8")
    iprs = np.sum(np.abs(vectors) ** 4, axis=0)
    return EigenReport(values, iprs, n, realization)


def spacing_ratios(eigenvalues: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(energy, ratio) pairs: r_i = min(d_i, d_i+1)/max(d_i, d_i+1) for
    consecutive spacings d of the sorted spectrum, attributed to the
    middle eigenvalue."""
    e = np.sort(np.asarray(eigenvalues))
    d = np.diff(e)
    if len(d) < 2:
        return np.zeros(0), np.zeros(0)
    lo = np.minimum(d[:-1], d[1:])
    hi = np.maximum(d[:-1], d[1:])
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(hi > 0, lo / hi, np.nan)
    return e[1:-1], r


@dataclass(frozen=True)
class EdgeBin:
    lo: float
    hi: float
    count: int
    median_ipr: float
    r_stat: float


@dataclass(frozen=True)
class EdgeScan:
    bins: tuple[EdgeBin, ...]
    h0_norm_1: float
    h0_norm_s: float
    s: float
    realizations: int

    def band_center_median(self) -> float:
        for b in self.bins:
            if b.lo <= 0.0 < b.hi and b.count > 0:
                return b.median_ipr
        raise ValueError("no populated bin containing E = 0")

    def pooled_median_outside(self, threshold: float) -> float:
        pooled = [
            b.median_ipr
            for b in self.bins
            if b.count > 0 and (b.hi <= -threshold or b.lo >= threshold)
        ]
        if not pooled:
            raise ValueError(f"no populated bins beyond |E| > {threshold}")
        return float(np.median(pooled))


def mobility_edge_scan(
    kernel: KernelOperator,
    sparse: SparseSet,
    model: DisorderModel,
    volume: Cube,
    realizations: int,
    s: float,
    bin_width: float = 0.1,
    threads: int = 1,
) -> EdgeScan:
    """Pool eigen-reports over realizations and bin the spectrum.

    Per bin: state count, median IPR, and the mean consecutive-spacing
    ratio.  Marker energies ||H0||_1 and ||H0||_s are computed from the
    kernel, never configured.  Empty bins are reported with NaN
    statistics rather than dropped.
    """
    if realizations < 20:
        raise ValueError("need at least 20 realizations")

    def one(r: int) -> EigenReport:
        pot = sample_potential(model, sparse, r)
        op = assemble_finite_volume(kernel, pot, volume)
        return eigensystem(op, realization=r)

    reports = run_indexed(one, realizations, threads)
    energies = np.concatenate([rep.eigenvalues for rep in reports])
    iprs = np.concatenate([rep.iprs for rep in reports])
    r_energy = []
    r_value = []
    for rep in reports:
        es, rs = spacing_ratios(rep.eigenvalues)
        r_energy.append(es)
        r_value.append(rs)
    r_energy = np.concatenate(r_energy) if r_energy else np.zeros(0)
    r_value = np.concatenate(r_value) if r_value else np.zeros(0)

    lo_edge = math.floor(float(energies.min()) / bin_width) * bin_width
    n_bins = int(math.ceil((float(energies.max()) - lo_edge) / bin_width)) + 1
    bins = []
    for i in range(n_bins):
        lo = lo_edge + i * bin_width
        hi = lo + bin_width
        mask = (energies >= lo) & (energies < hi)
        count = int(mask.sum())
        med = float(np.median(iprs[mask])) if count else math.nan
        rmask = (r_energy >= lo) & (r_energy < hi) & np.isfinite(r_value)
        rstat = float(np.mean(r_value[rmask])) if rmask.any() else math.nan
        bins.append(EdgeBin(lo, hi, count, med, rstat))
    total = sum(b.count for b in bins)
    if total != energies.size:
        raise RuntimeError(f"bin counts {total} != pooled states {energies.size}")
    return EdgeScan(
        tuple(bins),
        s_norm(kernel, 1.0),
        s_norm(kernel, s),
        s,
        realizations,
    )
