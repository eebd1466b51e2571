"""Periodic B-spline basis for the space of uniform splines on a P-point grid.

The basis generator of order M on grid step h = 2*pi/P has Fourier series
coefficients

    beta_hat[k] = P^(M-1) * ((1 - e^{-ik*2pi/P}) / (2*pi*i*k))^M,     k != 0,
    beta_hat[0] = 1/P,

is supported on [0, M*h] for P >= M, and sums to one over all grid shifts.
Applying the M-th derivative to a coefficient expansion produces a stream of
point masses at the grid nodes whose weights are a binomial (difference)
filter convolved with the coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier import (
    DIRAC_STREAM_COEFF,
    TWO_PI,
    MeasurementVector,
    PeriodicSpline,
    torus_distance,
    wrap_angle,
)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``grid_points`` nodes for splines of a given order.

    ``grid_points >= order`` keeps the basis generator unaliased and
    ``grid_points >= 2*cutoff + 1`` is required by the FFT solver path.
    """

    order: int
    grid_points: int
    cutoff: int

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.grid_points < 1:
            raise ValueError("grid_points must be >= 1")
        if self.cutoff < 0:
            raise ValueError("cutoff must be >= 0")

    @property
    def h(self) -> float:
        return TWO_PI / self.grid_points

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.grid_points) * self.h

    @property
    def innovation_scale(self) -> float:
        """(P / 2*pi)^(order-1), the coefficient-to-innovation gain."""
        return (self.grid_points / TWO_PI) ** (self.order - 1)


@dataclass(frozen=True)
class SplineCoefficients:
    """Real basis coefficients c[0..P-1] on a grid."""

    grid: GridSpec
    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (self.grid.grid_points,):
            raise ValueError(
                f"expected {self.grid.grid_points} coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class InnovationVector:
    """Weights of the derivative point masses at the grid nodes (zero total)."""

    grid: GridSpec
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.shape != (self.grid.grid_points,):
            raise ValueError("innovation length must equal grid_points")
        total = a.sum()
        # Relative slack, with an absolute floor at the rounding error of the
        # summation itself (the whole vector can be numerical debris).
        floor = np.finfo(float).eps * a.size * max(1.0, float(np.abs(a).max(initial=0.0)))
        if abs(total) > max(1e-10 * np.abs(a).sum(), floor):
            raise ValueError(f"innovation weights must sum to zero (got {total!r})")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)


def bspline_fourier_coeff(grid: GridSpec, k):
    """Fourier series coefficients of the periodic basis generator.

    Vanishes exactly at nonzero multiples of ``grid_points`` and equals
    1/grid_points at k = 0.
    """
    k = np.asarray(k)
    scalar = k.ndim == 0
    ks = np.atleast_1d(k).astype(float)
    P, M = grid.grid_points, grid.order
    out = np.zeros(ks.shape, dtype=complex)
    on_lattice = np.mod(ks, P) == 0
    free = ~on_lattice
    kf = ks[free]
    out[free] = P ** (M - 1) * ((1.0 - np.exp(-1j * kf * grid.h)) / (2j * np.pi * kf)) ** M
    out[ks == 0] = 1.0 / P
    return complex(out[0]) if scalar else out


def d_filter(order: int, grid_points: int) -> np.ndarray:
    """Signed binomial difference filter of the given order, periodized.

    The length-``grid_points`` sequence whose DFT is (1 - e^{-i*2pi*k/P})^order.
    """
    if grid_points < 1:
        raise ValueError("grid_points must be >= 1")
    d = np.zeros(grid_points)
    for m in range(order + 1):
        d[m % grid_points] += (-1) ** m * math.comb(order, m)
    return d


def cyclic_convolve_filter(order: int, v: np.ndarray) -> np.ndarray:
    """Cyclic convolution of v with the order-th difference filter.

    Computed in the signal domain from the binomial taps, which keeps the
    zero-sum property exact to rounding.
    """
    out = np.zeros_like(v, dtype=float)
    for m in range(order + 1):
        out += (-1) ** m * math.comb(order, m) * np.roll(v, m)
    return out


def cyclic_correlate_filter(order: int, v: np.ndarray) -> np.ndarray:
    """Adjoint of ``cyclic_convolve_filter`` (correlation with the taps)."""
    out = np.zeros_like(v, dtype=float)
    for m in range(order + 1):
        out += (-1) ** m * math.comb(order, m) * np.roll(v, -m)
    return out


def innovation(c: SplineCoefficients) -> InnovationVector:
    """Derivative point-mass weights of a coefficient expansion.

    a = (P / 2*pi)^(order-1) * (d * c) with d the difference filter and *
    the cyclic convolution.
    """
    grid = c.grid
    a = grid.innovation_scale * cyclic_convolve_filter(grid.order, c.c)
    return InnovationVector(grid, a)


def synthesize(c: SplineCoefficients, amp_tol: float = 1e-8) -> PeriodicSpline:
    """Continuous-domain spline represented by a coefficient vector.

    Knots sit at grid nodes whose innovation weight exceeds
    ``amp_tol * max|a|``; the Green's-function amplitudes are the innovation
    weights scaled by DIRAC_STREAM_COEFF, and the mean is the coefficient
    mean (the shifted generators sum to one).  Kept amplitudes are recentered
    so they sum to zero exactly.
    """
    grid = c.grid
    a = innovation(c).a
    amax = np.abs(a).max() if a.size else 0.0
    # Innovation at the rounding level of the difference filter means the
    # coefficients are constant up to noise.
    zero_floor = 1e-12 * grid.innovation_scale * max(1.0, float(np.abs(c.c).max(initial=0.0)))
    if amax <= zero_floor:
        return PeriodicSpline.constant(grid.order, float(c.c.mean()))
    keep = np.abs(a) > amp_tol * amax
    amps = DIRAC_STREAM_COEFF * a[keep]
    amps = amps - amps.sum() / amps.size
    return PeriodicSpline(grid.order, float(c.c.mean()), grid.nodes[keep], amps)


def bspline_eval(grid: GridSpec, x, truncation: int | None = None):
    """Basis generator values by truncated Fourier synthesis.

    Plotting-grade accuracy by default (|k| <= max(64, 16*P)); pass a larger
    ``truncation`` when tighter pointwise error is needed.
    """
    if truncation is None:
        truncation = max(64, 16 * grid.grid_points)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    out = np.full(xs.shape, 1.0 / grid.grid_points)
    chunk = 1 << 19
    for lo in range(1, truncation + 1, chunk):
        k = np.arange(lo, min(lo + chunk, truncation + 1))
        bk = bspline_fourier_coeff(grid, k)
        out += 2.0 * np.real(np.exp(1j * xs[:, None] * k) @ bk)
    return float(out[0]) if scalar else out


class SystemMatrix:
    """Measurement operator mapping coefficient vectors to observations.

    Row k applies the Fourier functional at frequency k to the shifted
    generators: H[k, l] = e^{-i*k*l*2pi/P} * beta_hat[k].  Provides a
    materialized matrix, an FFT matrix-free application, the adjoint as a
    real functional, and the DFT multipliers of the real normal operator.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.beta_hat = bspline_fourier_coeff(grid, np.arange(grid.cutoff + 1))

    def dense(self) -> np.ndarray:
        """Complex matrix of shape (cutoff + 1, grid_points)."""
        P, Kc = self.grid.grid_points, self.grid.cutoff
        k = np.arange(Kc + 1)[:, None]
        ell = np.arange(P)[None, :]
        return np.exp(-1j * k * ell * self.grid.h) * self.beta_hat[:, None]

    def dense_real(self) -> np.ndarray:
        """Real matrix of shape (2*cutoff + 1, grid_points).

        Row 0 is the mean functional; rows 2k-1 and 2k are the real and
        imaginary parts of frequency k, so squared residuals match the
        one-slot-per-coefficient norm.
        """
        H = self.dense()
        rows = [H[0].real]
        for k in range(1, self.grid.cutoff + 1):
            rows.append(H[k].real)
            rows.append(H[k].imag)
        return np.array(rows)

    def apply(self, c: np.ndarray) -> MeasurementVector:
        """Matrix-free forward application via one FFT."""
        P, Kc = self.grid.grid_points, self.grid.cutoff
        C = np.fft.fft(np.asarray(c, dtype=float))
        mean = C[0].real / P
        k = np.arange(1, Kc + 1)
        coeffs = C[k % P] * self.beta_hat[1:]
        return MeasurementVector(mean, coeffs)

    def apply_adjoint(self, z: MeasurementVector) -> np.ndarray:
        """Real vector b with <c, b> = <H c, z> for every real c."""
        P, Kc = self.grid.grid_points, self.grid.cutoff
        if z.cutoff != Kc:
            raise ValueError("measurement cutoff does not match the grid")
        B = np.zeros(P, dtype=complex)
        B[0] = P * self.beta_hat[0].real * z.mean
        k = np.arange(1, Kc + 1)
        Bk = 0.5 * P * np.conj(self.beta_hat[1:]) * z.coeffs
        B[k % P] += Bk
        B[(-k) % P] += np.conj(Bk)
        return np.fft.ifft(B).real

    def normal_multipliers(self) -> np.ndarray:
        """DFT-domain eigenvalues of the real normal operator of ``dense_real``.

        Valid (alias-free) for grid_points >= 2*cutoff + 1.
        """
        P, Kc = self.grid.grid_points, self.grid.cutoff
        if P < 2 * Kc + 1:
            raise ValueError("normal multipliers need grid_points >= 2*cutoff + 1")
        m = np.zeros(P)
        m[0] = P * self.beta_hat[0].real ** 2
        k = np.arange(1, Kc + 1)
        mk = 0.5 * P * np.abs(self.beta_hat[1:]) ** 2
        m[k] = mk
        m[P - k] = mk
        return m


def system_matrix(grid: GridSpec) -> SystemMatrix:
    return SystemMatrix(grid)


def extract_knots(a: InnovationVector, amp_tol: float = 1e-8) -> list[tuple[float, float]]:
    """Grid locations carrying innovation weight above amp_tol * max|a|.

    Returns (location, weight) pairs in innovation (unit point mass) units.
    """
    if amp_tol < 0:
        raise ValueError("amp_tol must be >= 0")
    amax = np.abs(a.a).max() if a.a.size else 0.0
    if amax == 0.0:
        return []
    keep = np.flatnonzero(np.abs(a.a) > amp_tol * amax)
    nodes = a.grid.nodes
    return [(float(nodes[p]), float(a.a[p])) for p in keep]


def merge_knots(knots: list[tuple[float, float]], dist_tol: float,
                amp_tol: float = 0.0) -> list[tuple[float, float]]:
    """Merge knots within dist_tol (transitively, on the torus) into clusters.

    Each cluster reports its |weight|-weighted circular centroid and summed
    weight; clusters with |net weight| <= amp_tol are dropped.
    """
    if dist_tol < 0:
        raise ValueError("dist_tol must be >= 0")
    if not knots:
        return []
    locs = wrap_angle(np.array([k[0] for k in knots], dtype=float))
    wts = np.array([k[1] for k in knots], dtype=float)
    idx = np.argsort(locs, kind="stable")
    locs, wts = locs[idx], wts[idx]
    clusters = [[0]]
    for i in range(1, locs.size):
        if locs[i] - locs[clusters[-1][-1]] <= dist_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    # Wraparound: the last cluster may continue into the first one.
    if len(clusters) > 1 and torus_distance(locs[clusters[-1][-1]], locs[clusters[0][0]]) <= dist_tol:
        clusters[0] = clusters.pop() + clusters[0]
    out = []
    for members in clusters:
        w = wts[members]
        net = float(w.sum())
        if abs(net) <= amp_tol:
            continue
        weight_abs = np.abs(w)
        if weight_abs.sum() == 0.0:
            weight_abs = np.ones_like(w)
        z = np.sum(weight_abs * np.exp(1j * locs[members]))
        centroid = float(wrap_angle(np.angle(z)))
        out.append((centroid, net))
    out.sort(key=lambda t: t[0])
    return out
