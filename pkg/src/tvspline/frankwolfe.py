"""Gridless conditional-gradient solver over zero-mean measures.

Solves

    min_w  0.5 * ||y~ - nu(w)||^2 + lambda * ||w||_TV

where w ranges over zero-mean discrete measures, nu = measure_atoms is the
low-pass measurement of the mean-free antiderivative, and y~ is the data
with its mean slot zeroed.  The norm ball is lifted to the epigraph set
{(w, t): ||w||_TV <= t <= bound} with bound = ||y~||^2 / (2*lambda), whose
extreme points are (0, 0) and pairs of opposite point masses of mass
bound/2.  Each iteration locates the extrema of the dual certificate

    eta = (1/lambda) * adjoint(y~ - nu(w)),

inserts the corresponding pair when the certificate oscillation reaches 2,
moves by harmonic or exact line search, and optionally re-optimizes the
weights on the current support.  Oscillation max eta - min eta <= 2 (plus
slack) certifies optimality and stops the loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fourier import (
    DIRAC_STREAM_COEFF,
    TWO_PI,
    MeasurementVector,
    PeriodicSpline,
    TrigPolynomial,
    ZeroMeanMeasure,
    apply_adjoint,
    measure_atoms,
    torus_distance,
    tv_norm,
    wrap_angle,
)

_NEWTON_MAX_STEPS = 60
_GAP_RTOL = 1e-12


@dataclass
class FwParams:
    """Solver knobs.

    ``max_outer_iters=None`` selects 10 * (2*cutoff + 1).  ``grid_density``
    is the number of coarse certificate samples per unit of polynomial
    degree before Newton refinement.
    """

    max_outer_iters: int | None = None
    stop_tol: float = 1e-6
    step_rule: str = "exact_line_search"
    grid_density: int = 64
    refit: bool = True
    refit_l1: bool = True

    def __post_init__(self):
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.grid_density < 8:
            raise ValueError("grid_density must be >= 8")
        if self.step_rule not in ("harmonic", "exact_line_search"):
            raise ValueError("step_rule must be 'harmonic' or 'exact_line_search'")


@dataclass
class FwState:
    """Iterate (w, t) in the lifted feasible set, plus a run history.

    History rows are (iteration, lifted objective, certificate oscillation).
    """

    w: ZeroMeanMeasure
    t: float
    bound: float
    history: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


@dataclass(frozen=True)
class ExtremeResult:
    x_max: float
    max_value: float
    x_min: float
    min_value: float
    degenerate: bool = False

    @property
    def oscillation(self) -> float:
        return self.max_value - self.min_value


def lifted_objective(state: FwState, y: MeasurementVector, lam: float,
                     order: int) -> float:
    """0.5 * ||y~ - nu(w)||^2 + lambda * t at the current iterate."""
    r = y.zero_mean() - measure_atoms(state.w, order, y.cutoff)
    return 0.5 * r.norm_sq() + lam * state.t


def certificate(state: FwState, y: MeasurementVector, lam: float,
                order: int) -> TrigPolynomial:
    """Dual certificate (1/lambda) * adjoint(y~ - nu(w)), zero mean."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    r = y.zero_mean() - measure_atoms(state.w, order, y.cutoff)
    return apply_adjoint(r, order).scaled(1.0 / lam)


def extremize(eta: TrigPolynomial, grid_density: int = 64) -> ExtremeResult:
    """Global maximum and minimum of a trigonometric polynomial on the torus.

    Coarse sampling at grid_density * max(degree, 1) equispaced points,
    then Newton refinement of every coarse local extremum using the exact
    derivative, keeping the best candidate; exact ties break toward the
    smallest location.
    """
    if grid_density < 8:
        raise ValueError("grid_density must be >= 8")
    deg = eta.degree
    if deg == 0 or not np.any(np.abs(eta.coeffs) > 0.0):
        return ExtremeResult(0.0, eta.mean, 0.0, eta.mean, degenerate=True)
    n = grid_density * max(deg, 1)
    xs = np.arange(n) * (TWO_PI / n)
    vals = eta(xs)
    scale = max(np.abs(vals).max(), 1e-300)
    x_max, v_max = _refine_extrema(eta, xs, vals, scale, maximize=True)
    x_min, v_min = _refine_extrema(eta, xs, vals, scale, maximize=False)
    return ExtremeResult(x_max, v_max, x_min, v_min)


def _refine_extrema(eta, xs, vals, scale, maximize):
    sign = 1.0 if maximize else -1.0
    v = sign * vals
    left, right = np.roll(v, 1), np.roll(v, -1)
    cand_idx = np.flatnonzero((v >= left) & (v >= right))
    d1 = eta.derivative()
    d2 = d1.derivative()
    spacing = xs[1] - xs[0]
    tol = 1e-12 * scale * max(eta.degree, 1)
    best_x, best_v = None, -np.inf
    for i in cand_idx:
        x = _newton_refine(eta, d1, d2, xs[i], sign, spacing, tol)
        val = sign * eta(x)
        if val > best_v + 1e-12 * scale or (
            abs(val - best_v) <= 1e-12 * scale and (best_x is None or x < best_x)
        ):
            best_x, best_v = x, val
    return float(wrap_angle(best_x)), float(sign * best_v)


def _newton_refine(eta, d1, d2, x0, sign, spacing, tol):
    x = x0
    for _ in range(_NEWTON_MAX_STEPS):
        g = d1(x)
        if abs(g) <= tol:
            break
        h = d2(x)
        if sign * h >= 0.0:
            break
        step = -g / h
        if abs(step) > spacing:
            step = np.sign(step) * spacing
        x_new = x + step
        if sign * eta(x_new) < sign * eta(x):
            # Overshoot: damp until the value improves or the step dies out.
            shrink, improved = 0.5, False
            for _ in range(20):
                x_try = x + shrink * step
                if sign * eta(x_try) >= sign * eta(x):
                    x_new, improved = x_try, True
                    break
                shrink *= 0.5
            if not improved:
                break
        if abs(x_new - x) < 1e-16:
            x = x_new
            break
        x = x_new
    return x


def greedy_step(state: FwState, y: MeasurementVector, lam: float, order: int,
                grid_density: int = 64) -> tuple[ZeroMeanMeasure, float]:
    """Extreme point of the lifted set minimizing the linearized objective.

    Returns the pair of opposite masses bound/2 at the certificate extrema
    when the oscillation reaches 2, and (0, 0) otherwise.
    """
    eta = certificate(state, y, lam, order)
    ext = extremize(eta, grid_density)
    return _candidate_from_extrema(ext, state.bound)


def _candidate_from_extrema(ext: ExtremeResult, bound: float):
    if ext.degenerate or ext.oscillation < 2.0 or ext.x_max == ext.x_min or bound == 0.0:
        return ZeroMeanMeasure.empty(), 0.0
    half = 0.5 * bound
    return ZeroMeanMeasure([ext.x_max, ext.x_min], [half, -half]), bound


def merge_atom_clusters(w: ZeroMeanMeasure, radius: float,
                        eta: TrigPolynomial | None = None) -> ZeroMeanMeasure:
    """Consolidate a measure against the current certificate.

    When a certificate is supplied, every atom first moves to the nearby
    extremum of ``eta`` in the direction of its weight's sign (at optimality
    the support lies in the saturation set of the centered certificate, so a
    displaced atom stands in for a knot at the saturation point).  Atom
    groups then within ``radius`` of each other (transitively, on the torus)
    collapse to single atoms at their |weight|-centroids with the net weight;
    zero-net groups vanish.
    """
    if w.n_atoms < 2:
        return w
    locs, wts = w.locations, w.weights
    if eta is not None:
        d1 = eta.derivative()
        d2 = d1.derivative()
        scale = max(float(np.max(np.abs(eta(locs)))), 1.0)
        tol = 1e-13 * scale * max(eta.degree, 1)
        moved = []
        for x, a in zip(locs, wts):
            x_new = _newton_refine(eta, d1, d2, x, np.sign(a), max(radius, 1e-12), tol)
            # A displaced atom mimics a knot nearby; a move beyond the merge
            # radius would be a different knot, so keep the original then.
            moved.append(x_new if torus_distance(x_new, x) <= radius else x)
        locs = wrap_angle(np.asarray(moved))
    idx = np.argsort(locs, kind="stable")
    locs, wts = locs[idx], wts[idx]
    groups = [[0]]
    for i in range(1, locs.size):
        if locs[i] - locs[groups[-1][-1]] <= radius:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) > 1 and (TWO_PI - locs[groups[-1][-1]]) + locs[groups[0][0]] <= radius:
        groups[0] = groups.pop() + groups[0]
    out_locs, out_wts = [], []
    for members in groups:
        net = wts[members].sum()
        absw = np.abs(wts[members])
        if absw.sum() == 0.0:
            continue
        z = np.sum(absw * np.exp(1j * locs[members]))
        out_locs.append(wrap_angle(np.angle(z)))
        out_wts.append(net)
    out_wts = np.asarray(out_wts)
    if out_wts.size:
        out_wts = out_wts - out_wts.sum() / out_wts.size
    return ZeroMeanMeasure(np.asarray(out_locs), out_wts)


def fully_corrective_refit(support, y: MeasurementVector, lam: float, order: int,
                           l1: bool = True) -> ZeroMeanMeasure:
    """Optimal zero-sum weights on a fixed support.

    Minimizes 0.5 * ||y~ - nu(sum_n a_n delta_{x_n})||^2 + lambda * ||a||_1
    subject to sum a = 0 when ``l1`` is set, and the plain zero-sum least
    squares otherwise (minimum-norm solution if rank deficient).  Atoms with
    |a| < 1e-10 * ||a||_1 are dropped.
    """
    support = np.atleast_1d(np.asarray(support, dtype=float))
    n = support.size
    if n == 0:
        raise ValueError("support must be nonempty")
    if np.any(np.diff(np.sort(support)) == 0.0):
        raise ValueError("support locations must be pairwise distinct")
    if n == 1:
        return ZeroMeanMeasure.empty()
    Phi = _atom_matrix_real(support, order, y.cutoff)
    yr = _data_real(y.zero_mean())
    if l1:
        a = _zero_sum_lasso(Phi, yr, lam)
    else:
        a = _zero_sum_lstsq(Phi, yr)
    w = ZeroMeanMeasure(support, a - a.sum() / n)
    return w.pruned(1e-10 * max(np.abs(a).sum(), 1e-300))


def _atom_matrix_real(support, order, cutoff):
    """Stacked (Re, Im) rows of the per-atom measurement columns."""
    k = np.arange(1, cutoff + 1)
    cols = DIRAC_STREAM_COEFF * np.exp(-1j * np.outer(k, support)) / (
        (1j * k) ** order
    )[:, None]
    return np.concatenate([cols.real, cols.imag], axis=0)


def _data_real(y):
    return np.concatenate([y.coeffs.real, y.coeffs.imag])


def _zero_sum_lstsq(Phi, yr):
    n = Phi.shape[1]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = Phi.T @ Phi
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.concatenate([Phi.T @ yr, [0.0]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    return sol[:n]


def _zero_sum_lasso(Phi, yr, lam, max_iters=5_000, tol=1e-10):
    """l1-penalized zero-sum weights: short ADMM, then an exact KKT polish.

    The polish solves the stationarity system on the detected support with
    fixed signs and verifies the full optimality conditions, so accepted
    solutions are exact to rounding; this matters when the certificate of
    the outer solver divides the residual by a tiny penalty weight.
    """
    n = Phi.shape[1]
    gram = Phi.T @ Phi
    rho = max(lam, 0.1 * np.trace(gram) / n, 1e-12)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = gram + rho * np.eye(n)
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    kkt_inv = np.linalg.pinv(kkt)
    Pty = Phi.T @ yr
    a = np.zeros(n)
    z = np.zeros(n)
    u = np.zeros(n)
    for _ in range(max_iters):
        rhs = np.concatenate([Pty + rho * (z - u), [0.0]])
        a = (kkt_inv @ rhs)[:n]
        z_old = z
        az = a + u
        z = np.sign(az) * np.maximum(np.abs(az) - lam / rho, 0.0)
        u = u + a - z
        r = np.linalg.norm(a - z)
        s = rho * np.linalg.norm(z - z_old)
        if r <= tol * max(1.0, np.linalg.norm(a)) and s <= tol * max(1.0, rho):
            break
    polished = _polish_zero_sum_lasso(Phi, yr, lam, z)
    return polished if polished is not None else a


def _polish_zero_sum_lasso(Phi, yr, lam, a0, max_rounds=8):
    """Active-set refinement: exact stationarity solve with sign verification.

    Returns None when no consistent support is found within the round budget.
    """
    n = Phi.shape[1]
    support = np.abs(a0) > max(1e-12, 1e-9 * np.abs(a0).max(initial=0.0))
    for _ in range(max_rounds):
        idx = np.flatnonzero(support)
        if idx.size < 2:
            return np.zeros(n)
        signs = np.sign(a0[idx])
        signs[signs == 0.0] = 1.0
        Ps = Phi[:, idx]
        k = idx.size
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = Ps.T @ Ps
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([Ps.T @ yr - lam * signs, [0.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        a_s, mu = sol[:k], sol[k]
        # Sign consistency on the support.
        bad = np.sign(a_s) * signs < 0
        if np.any(bad & (np.abs(a_s) > 1e-14 * max(1.0, np.abs(a_s).max()))):
            support[idx[bad]] = False
            a0 = a0.copy()
            a0[idx[bad]] = 0.0
            continue
        # Dual feasibility off the support.
        a_full = np.zeros(n)
        a_full[idx] = a_s
        grad = Phi.T @ (Phi @ a_full - yr) + mu
        off = ~support
        viol = off & (np.abs(grad) > lam * (1.0 + 1e-9) + 1e-14)
        if np.any(viol):
            j = int(np.argmax(np.where(viol, np.abs(grad), -np.inf)))
            support[j] = True
            a0 = a_full
            a0[j] = -np.sign(grad[j]) * 1e-30
            continue
        return a_full
    return None


def fw_solve(y: MeasurementVector, lam: float, order: int,
             params: FwParams | None = None) -> tuple[PeriodicSpline, FwState]:
    """Run the conditional-gradient loop and return the reconstruction.

    The returned spline has mean y_0 and one knot per atom of the final
    measure; its Green's-function amplitudes are the atom weights scaled by
    DIRAC_STREAM_COEFF.  ``state.converged`` reports whether the
    certificate-oscillation criterion (or a vanishing linearized gap) was
    met within the iteration budget.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if params is None:
        params = FwParams()
    y_tilde = y.zero_mean()
    bound = y_tilde.norm_sq() / (2.0 * lam)
    state = FwState(w=ZeroMeanMeasure.empty(), t=0.0, bound=bound)
    if y.cutoff == 0 or bound == 0.0:
        state.converged = True
        return PeriodicSpline.constant(order, y.mean), state

    max_iters = (
        params.max_outer_iters
        if params.max_outer_iters is not None
        else 10 * (2 * y.cutoff + 1)
    )
    merge_radius = TWO_PI / (params.grid_density * max(y.cutoff, 1)) / 2.0

    def objective_of(w, t):
        return lifted_objective(FwState(w=w, t=t, bound=bound), y, lam, order)

    for it in range(max_iters):
        state.iterations = it
        # Feasibility in the lifted set is preserved exactly by construction.
        assert tv_norm(state.w) <= state.t + 1e-12 * max(1.0, state.t)
        assert state.t <= bound * (1.0 + 1e-12)
        obj = lifted_objective(state, y, lam, order)
        eta = certificate(state, y, lam, order)
        slack = 1e-12 * max(1.0, abs(obj))

        # Consolidation: atoms closer than the certificate search resolution
        # stand in for a single knot; collapse them onto the certificate
        # extremum and re-optimize the weights.  Adopt the reduction when it
        # does not hurt, or when it already certifies optimality.
        if params.refit and state.w.n_atoms >= 2:
            merged = merge_atom_clusters(state.w, merge_radius, eta)
            if merged.n_atoms >= 2:
                cand = fully_corrective_refit(
                    merged.locations, y, lam, order, l1=params.refit_l1
                )
                cand_t = tv_norm(cand)
                cand_obj = objective_of(cand, cand_t)
                adopt = cand_obj <= obj + slack
                if not adopt:
                    cand_state = FwState(w=cand, t=cand_t, bound=bound)
                    cand_osc = extremize(
                        certificate(cand_state, y, lam, order), params.grid_density
                    ).oscillation
                    adopt = cand_osc <= 2.0 + params.stop_tol
                if adopt:
                    state.w, state.t = cand, cand_t
                    obj = lifted_objective(state, y, lam, order)
                    eta = certificate(state, y, lam, order)

        ext = extremize(eta, params.grid_density)
        osc = ext.oscillation
        state.history.append((it, obj, osc))
        if osc <= 2.0 + params.stop_tol:
            state.converged = True
            if params.refit:
                _final_consolidation(state, y, lam, order, params, merge_radius)
            break
        w_cand, t_cand = _candidate_from_extrema(ext, bound)

        # Linearized decrease toward the candidate; nonnegative means the
        # current iterate already minimizes the linear model over the set.
        gap = lam * (_pair_certificate_sum(state.w, eta) - state.t)
        gap -= lam * (_pair_certificate_sum(w_cand, eta) - t_cand)
        if w_cand.n_atoms == 0 and gap >= -_GAP_RTOL * max(1.0, abs(obj)):
            state.converged = True
            break

        if params.step_rule == "harmonic":
            gamma = 2.0 / (it + 2.0)
        else:
            gamma = _exact_line_search(state, w_cand, t_cand, y_tilde, lam, order)
        stepped = state.w.combine(w_cand, 1.0 - gamma, gamma)
        # Clear rounding debris only; genuine insertions can be far smaller
        # than the total mass bound when the step size is tiny.
        state.w = stepped.pruned(1e-14 * tv_norm(stepped))
        state.t = (1.0 - gamma) * state.t + gamma * t_cand

        if params.refit and state.w.n_atoms >= 2:
            refitted = fully_corrective_refit(
                state.w.locations, y, lam, order, l1=params.refit_l1
            )
            cand_t = tv_norm(refitted)
            if objective_of(refitted, cand_t) <= objective_of(state.w, state.t) + slack:
                state.w, state.t = refitted, cand_t
    else:
        state.iterations = max_iters

    spline = PeriodicSpline(
        order, y.mean, state.w.locations, DIRAC_STREAM_COEFF * state.w.weights
    ) if state.w.n_atoms else PeriodicSpline.constant(order, y.mean)
    return spline, state


def _final_consolidation(state, y, lam, order, params, merge_radius):
    """Shrink the support of a certified iterate without losing the certificate.

    Tries small-atom prunes and cluster merges of increasing radius; any
    candidate whose own certificate still oscillates within the stopping
    threshold is an equally valid solution, so the one with the fewest atoms
    wins.  Atoms closer than the merge radius are kept when splitting them
    apart is what certifies: nearby knots can be genuine solution structure.
    """
    best = state.w
    best_t = state.t
    for prune_rel in (0.0, 1e-6, 1e-3):
        for radius_factor in (0.0, 1.0, 2.0, 4.0):
            w = state.w
            if prune_rel > 0 and w.n_atoms:
                w = w.pruned(prune_rel * float(np.abs(w.weights).max()))
            if radius_factor > 0 and w.n_atoms >= 2:
                eta = certificate(
                    FwState(w=w, t=tv_norm(w), bound=state.bound), y, lam, order
                )
                w = merge_atom_clusters(w, radius_factor * merge_radius, eta)
            if not 2 <= w.n_atoms < best.n_atoms:
                continue
            cand = fully_corrective_refit(w.locations, y, lam, order, l1=params.refit_l1)
            if not 2 <= cand.n_atoms < best.n_atoms:
                continue
            cand_t = tv_norm(cand)
            cand_state = FwState(w=cand, t=cand_t, bound=state.bound)
            osc = extremize(
                certificate(cand_state, y, lam, order), params.grid_density
            ).oscillation
            if osc <= 2.0 + params.stop_tol:
                best, best_t = cand, cand_t
    state.w, state.t = best, best_t


def _pair_certificate_sum(w: ZeroMeanMeasure, eta: TrigPolynomial) -> float:
    if w.n_atoms == 0:
        return 0.0
    return float(np.dot(w.weights, eta(w.locations)))


def _exact_line_search(state, w_cand, t_cand, y_tilde, lam, order):
    """Closed-form minimizer over [0, 1] of the quadratic segment objective."""
    r0 = y_tilde - measure_atoms(state.w, order, y_tilde.cutoff)
    q = measure_atoms(w_cand.combine(state.w, 1.0, -1.0), order, y_tilde.cutoff)
    qq = q.norm_sq()
    inner = r0.mean * q.mean + float(np.sum(np.real(np.conj(r0.coeffs) * q.coeffs)))
    slope0 = -inner + lam * (t_cand - state.t)
    if qq <= 0.0:
        return 1.0 if slope0 < 0.0 else 0.0
    return float(np.clip((inner - lam * (t_cand - state.t)) / qq, 0.0, 1.0))
