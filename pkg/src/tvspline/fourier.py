"""Fourier-domain primitives on the torus.

All signals live on [0, 2*pi) with endpoints identified.  Fourier series
coefficients of a real function f follow the convention

    fhat[k] = (1 / (2*pi)) * integral_0^{2pi} f(x) exp(-i k x) dx,

so a constant has fhat[0] equal to its value and real functions have
Hermitian-symmetric coefficients.  Under this convention a unit point mass
has coefficient ``DIRAC_STREAM_COEFF = 1/(2*pi)`` at every frequency; that
single constant carries every conversion between spline amplitudes (weights
of shifted Green's functions) and the unit-mass Dirac weights of derivative
measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: Fourier coefficient, at every frequency, of a unit point mass on the torus.
DIRAC_STREAM_COEFF = 1.0 / TWO_PI

#: Relative slack on "weights sum to zero" checks for computed data.
ZERO_SUM_RTOL = 1e-12

#: Absolute torus distance below which measure atoms are merged.
ATOM_MERGE_TOL = 1e-12

_GREEN_CHUNK = 1 << 19


def wrap_angle(x):
    """Map x to the fundamental domain [0, 2*pi)."""
    return np.mod(x, TWO_PI)


def torus_distance(x, y):
    """Shortest distance between two angles on the torus."""
    d = np.abs(wrap_angle(x) - wrap_angle(y))
    return np.minimum(d, TWO_PI - d)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementVector:
    """Low-frequency observation: real mean plus coefficients 1..cutoff.

    Carries 2*cutoff + 1 real degrees of freedom (negative frequencies are
    implied by Hermitian symmetry).
    """

    mean: float
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        coeffs = np.array(self.coeffs, dtype=complex)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def cutoff(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, cutoff: int) -> "MeasurementVector":
        return cls(0.0, np.zeros(cutoff, dtype=complex))

    def zero_mean(self) -> "MeasurementVector":
        """Copy with the mean slot forced to zero."""
        return MeasurementVector(0.0, self.coeffs)

    def norm_sq(self) -> float:
        """Squared norm counting the mean once and each complex slot once."""
        return self.mean**2 + float(np.sum(np.abs(self.coeffs) ** 2))

    def __add__(self, other: "MeasurementVector") -> "MeasurementVector":
        self._check_compatible(other)
        return MeasurementVector(self.mean + other.mean, self.coeffs + other.coeffs)

    def __sub__(self, other: "MeasurementVector") -> "MeasurementVector":
        self._check_compatible(other)
        return MeasurementVector(self.mean - other.mean, self.coeffs - other.coeffs)

    def scaled(self, s: float) -> "MeasurementVector":
        return MeasurementVector(s * self.mean, s * self.coeffs)

    def _check_compatible(self, other):
        if self.cutoff != other.cutoff:
            raise ValueError(
                f"cutoff mismatch: {self.cutoff} vs {other.cutoff}"
            )


@dataclass(frozen=True)
class PeriodicSpline:
    """Periodic piecewise polynomial written as mean + Green's-function shifts.

    ``amplitudes[n]`` multiplies the zero-mean impulse response of the
    order-th derivative shifted to ``knots[n]``; the amplitudes of a valid
    spline sum to zero.
    """

    order: int
    mean: float
    knots: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        object.__setattr__(self, "mean", float(self.mean))
        knots = wrap_angle(np.atleast_1d(np.array(self.knots, dtype=float)))
        amps = np.atleast_1d(np.array(self.amplitudes, dtype=float))
        if knots.shape != amps.shape or knots.ndim != 1:
            raise ValueError("knots and amplitudes must be 1-d arrays of equal length")
        if knots.size:
            order_idx = np.argsort(knots, kind="stable")
            if np.any(np.diff(knots[order_idx]) == 0.0):
                raise ValueError("knots must be pairwise distinct")
            total = amps.sum()
            if abs(total) > ZERO_SUM_RTOL * max(np.abs(amps).sum(), 1e-300):
                raise ValueError(f"amplitudes must sum to zero (got {total!r})")
        knots.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_knots(self) -> int:
        return self.knots.shape[0]

    @classmethod
    def constant(cls, order: int, value: float) -> "PeriodicSpline":
        return cls(order, value, np.empty(0), np.empty(0))

    def __call__(self, x):
        return spline_eval(self, x)


@dataclass(frozen=True)
class ZeroMeanMeasure:
    """Finite sum of weighted point masses with zero total mass.

    Construction canonicalizes: locations are wrapped to [0, 2*pi), atoms
    closer than ``ATOM_MERGE_TOL`` on the torus are merged by summing their
    weights, and exact-zero weights are dropped.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        locs = np.atleast_1d(np.array(self.locations, dtype=float))
        wts = np.atleast_1d(np.array(self.weights, dtype=float))
        if locs.shape != wts.shape or locs.ndim != 1:
            raise ValueError("locations and weights must be 1-d arrays of equal length")
        locs, wts = _canonicalize_atoms(locs, wts)
        total = wts.sum() if wts.size else 0.0
        if abs(total) > ZERO_SUM_RTOL * max(np.abs(wts).sum(), 1e-300):
            raise ValueError(f"weights must sum to zero (got {total!r})")
        locs.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "weights", wts)

    @property
    def n_atoms(self) -> int:
        return self.locations.shape[0]

    @classmethod
    def empty(cls) -> "ZeroMeanMeasure":
        return cls(np.empty(0), np.empty(0))

    def combine(self, other: "ZeroMeanMeasure", s_self: float = 1.0,
                s_other: float = 1.0) -> "ZeroMeanMeasure":
        """Canonicalized s_self * self + s_other * other."""
        return ZeroMeanMeasure(
            np.concatenate([self.locations, other.locations]),
            np.concatenate([s_self * self.weights, s_other * other.weights]),
        )

    def scaled(self, s: float) -> "ZeroMeanMeasure":
        return ZeroMeanMeasure(self.locations, s * self.weights)

    def pruned(self, weight_tol: float) -> "ZeroMeanMeasure":
        """Drop atoms with |weight| <= weight_tol, recentering the rest."""
        keep = np.abs(self.weights) > weight_tol
        wts = self.weights[keep]
        if wts.size:
            wts = wts - wts.sum() / wts.size
        return ZeroMeanMeasure(self.locations[keep], wts)


def _canonicalize_atoms(locs, wts):
    locs = wrap_angle(locs)
    if locs.size == 0:
        return locs.astype(float), wts.astype(float)
    idx = np.argsort(locs, kind="stable")
    locs, wts = locs[idx], wts[idx]
    # Cluster runs of near-identical locations, including the 0/2*pi seam.
    starts = [0]
    for i in range(1, locs.size):
        if locs[i] - locs[starts[-1]] > ATOM_MERGE_TOL:
            starts.append(i)
    merged_loc, merged_w = [], []
    for j, s in enumerate(starts):
        e = starts[j + 1] if j + 1 < len(starts) else locs.size
        merged_loc.append(locs[s])
        merged_w.append(wts[s:e].sum())
    if len(merged_loc) > 1 and (TWO_PI - merged_loc[-1]) + merged_loc[0] <= ATOM_MERGE_TOL:
        merged_w[0] += merged_w[-1]
        merged_loc.pop()
        merged_w.pop()
    out_l = np.array(merged_loc)
    out_w = np.array(merged_w)
    keep = out_w != 0.0
    return out_l[keep], out_w[keep]


@dataclass(frozen=True)
class TrigPolynomial:
    """Real trigonometric polynomial: mean + sum_k 2*Re(coeffs[k-1]*e^{ikx})."""

    mean: float
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        coeffs = np.atleast_1d(np.array(self.coeffs, dtype=complex))
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.degree + 1)
        phases = np.exp(1j * x[..., None] * k)
        vals = self.mean + 2.0 * np.real(phases @ self.coeffs)
        return vals if vals.ndim else float(vals)

    def derivative(self) -> "TrigPolynomial":
        k = np.arange(1, self.degree + 1)
        return TrigPolynomial(0.0, 1j * k * self.coeffs)

    def scaled(self, s: float) -> "TrigPolynomial":
        return TrigPolynomial(s * self.mean, s * self.coeffs)


# ---------------------------------------------------------------------------
# Green's functions
# ---------------------------------------------------------------------------


def green_truncation(order: int, tol: float) -> int:
    """Frequency cutoff making the series tail 2*sum_{k>K} k^-order <= tol.

    Only meaningful for order >= 2 (the order-1 series converges
    conditionally, with no uniform tail bound).
    """
    if order < 2:
        raise ValueError("tail bound requires order >= 2")
    return int(math.ceil((2.0 / ((order - 1) * tol)) ** (1.0 / (order - 1))))


def green_tail_bound(order: int, truncation: int) -> float:
    """Upper bound 2*sum_{k>truncation} k^-order on the truncation error."""
    if order < 2:
        raise ValueError("tail bound requires order >= 2")
    return 2.0 * truncation ** (1 - order) / (order - 1)


def green_eval(order: int, x: float, truncation: int) -> float:
    """Truncated series value of the zero-mean periodic Green's function.

    Returns sum_{0<|k|<=truncation} e^{ikx} / (ik)^order, a real number.
    For order 1 the underlying function jumps at x = 0 (mod 2*pi) and
    evaluation there is refused.

    Parameters
    ----------
    order : int
        Derivative order, >= 1.
    x : float
        Evaluation point.
    truncation : int
        Number of positive frequencies summed, >= 1.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if order == 1 and abs(math.remainder(x, TWO_PI)) < 1e-12:
        raise ValueError("evaluation at discontinuity: order 1 at x = 0 (mod 2*pi)")
    total = 0.0
    for lo in range(1, truncation + 1, _GREEN_CHUNK):
        k = np.arange(lo, min(lo + _GREEN_CHUNK, truncation + 1))
        total += 2.0 * float(np.sum(np.real(np.exp(1j * k * x) / (1j * k) ** order)))
    return total


def green_closed_form(order: int, x):
    """Exact values of the periodic Green's function for orders 1 and 2.

    Order 1 is the sawtooth pi - x on (0, 2*pi); the jump at 0 takes its
    right-limit value pi.  Order 2 is -pi^2/3 + pi*x - x^2/2 on [0, 2*pi].
    """
    t = wrap_angle(np.asarray(x, dtype=float))
    if order == 1:
        out = np.pi - t
    elif order == 2:
        out = -np.pi**2 / 3.0 + np.pi * t - 0.5 * t * t
    else:
        raise ValueError("closed form available for orders 1 and 2 only")
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Spline evaluation and measurement
# ---------------------------------------------------------------------------

_KNOT_CHUNK = 256


def spline_eval(s: PeriodicSpline, x, tol: float = 1e-9):
    """Pointwise values of a periodic spline.

    Orders 1 and 2 use the exact closed-form Green's functions (order 1 at a
    knot returns the right-limit value).  Higher orders use the truncated
    series with a tail below ``tol`` relative to the l1 norm of the
    amplitudes.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    if s.n_knots == 0:
        out = np.full(xs.shape, s.mean)
        return float(out[0]) if scalar else out
    if s.order <= 2:
        out = np.full(xs.shape, s.mean)
        for lo in range(0, s.n_knots, _KNOT_CHUNK):
            kn = s.knots[lo:lo + _KNOT_CHUNK]
            am = s.amplitudes[lo:lo + _KNOT_CHUNK]
            out += green_closed_form(s.order, xs[:, None] - kn[None, :]) @ am
    else:
        trunc = green_truncation(s.order, tol)
        out = np.full(xs.shape, s.mean)
        for lo in range(1, trunc + 1, _GREEN_CHUNK):
            k = np.arange(lo, min(lo + _GREEN_CHUNK, trunc + 1))
            sk = np.exp(-1j * np.outer(k, s.knots)) @ s.amplitudes
            out += 2.0 * np.real(np.exp(1j * xs[:, None] * k) @ (sk / (1j * k) ** s.order))
    return float(out[0]) if scalar else out


def spline_profile(s: PeriodicSpline, n: int, offset: float = 0.0,
                   tol: float = 1e-9) -> np.ndarray:
    """Spline values on the uniform grid x_j = (j + offset) * 2*pi / n.

    Orders 1 and 2 reuse the exact pointwise path; higher orders fold the
    series coefficients onto the grid and synthesize with one inverse FFT.
    """
    xs = (np.arange(n) + offset) * (TWO_PI / n)
    if s.order <= 2 or s.n_knots == 0:
        return spline_eval(s, xs, tol=tol)
    trunc = green_truncation(s.order, tol)
    folded = np.zeros(n, dtype=complex)
    for lo in range(1, trunc + 1, _GREEN_CHUNK):
        k = np.arange(lo, min(lo + _GREEN_CHUNK, trunc + 1))
        coef = (np.exp(-1j * np.outer(k, s.knots)) @ s.amplitudes) / (1j * k) ** s.order
        if offset != 0.0:
            coef = coef * np.exp(1j * k * offset * (TWO_PI / n))
        np.add.at(folded, k % n, coef)
    vals = np.fft.ifft(folded) * n
    return s.mean + 2.0 * vals.real


def measure(s: PeriodicSpline, cutoff: int) -> MeasurementVector:
    """Exact low-frequency Fourier coefficients of a spline.

    Component 0 is the mean; component k is
    sum_n amplitudes[n] * e^{-ik*knots[n]} / (ik)^order, in closed form.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    if cutoff == 0 or s.n_knots == 0:
        return MeasurementVector(s.mean, np.zeros(cutoff, dtype=complex))
    k = np.arange(1, cutoff + 1)
    sums = np.exp(-1j * np.outer(k, s.knots)) @ s.amplitudes
    return MeasurementVector(s.mean, sums / (1j * k) ** s.order)


def measure_atoms(w: ZeroMeanMeasure, order: int, cutoff: int) -> MeasurementVector:
    """Low-frequency data of the mean-free signal whose order-th derivative is w.

    The mean slot is always zero.  Each unit point mass contributes
    DIRAC_STREAM_COEFF * e^{-ik x} / (ik)^order at frequency k.
    """
    if cutoff == 0 or w.n_atoms == 0:
        return MeasurementVector(0.0, np.zeros(cutoff, dtype=complex))
    k = np.arange(1, cutoff + 1)
    sums = np.exp(-1j * np.outer(k, w.locations)) @ w.weights
    return MeasurementVector(0.0, DIRAC_STREAM_COEFF * sums / (1j * k) ** order)


def apply_adjoint(z: MeasurementVector, order: int) -> TrigPolynomial:
    """Adjoint of ``measure_atoms`` as a zero-mean trigonometric polynomial.

    For any zero-mean measure w and data z,
    <w, apply_adjoint(z, order)> equals the real inner product
    <measure_atoms(w, order, .), z>, with the mean slot of z ignored.
    """
    k = np.arange(1, z.cutoff + 1)
    coeffs = DIRAC_STREAM_COEFF * z.coeffs / (2.0 * (-1j * k) ** order)
    return TrigPolynomial(0.0, coeffs)


def tv_norm(w: ZeroMeanMeasure) -> float:
    """Total-variation norm of a discrete measure: l1 norm of its weights."""
    return float(np.abs(w.weights).sum())


def spline_to_innovation_measure(s: PeriodicSpline) -> ZeroMeanMeasure:
    """Order-th derivative of a spline as a measure with unit-Dirac weights."""
    return ZeroMeanMeasure(s.knots, s.amplitudes / DIRAC_STREAM_COEFF)


def innovation_measure_to_spline(w: ZeroMeanMeasure, order: int,
                                 mean: float) -> PeriodicSpline:
    """Inverse of ``spline_to_innovation_measure`` with a prescribed mean."""
    return PeriodicSpline(order, mean, w.locations, DIRAC_STREAM_COEFF * w.weights)
