"""Bowen root, cusp-winding spectrum solver, grid scans and diagnostics."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coding import (
    Letter,
    TruncatedAlphabet,
    admissible,
    cusp_vector,
    distortion_law_sup,
    inverse_branch,
    letter_arc,
)
from .moebius import coeff_apply, coeff_log_denominator
from .pressure import (
    ConvergenceError,
    PotentialParams,
    PressureError,
    build_model,
    distortion_bound,
    gibbs_stats,
    pressure,
    pressure_gradient,
    spectral_radius,
    weight_matrix,
)
from .schottky import GroupPresentation

log = logging.getLogger(__name__)

DIM_BRACKET = (0.501, 0.999)
DIM_WIDENED = 1.2


class SolverError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DimResult:
    s: float
    bracket: tuple[float, float]
    L: int
    residual: float
    evaluations: int = 0


@dataclass(frozen=True)
class SpectrumPoint:
    alpha: np.ndarray
    q: np.ndarray
    b: float
    residual_p: float
    residual_grad: np.ndarray
    a_integrals: np.ndarray
    lyapunov: float
    entropy: float
    L: int
    newton_iterations: int
    distortion_bound: float = 0.0


@dataclass(frozen=True)
class SpectrumFailure:
    alpha: np.ndarray
    message: str
    L: int


@dataclass(frozen=True)
class OracleResult:
    b_low: float
    b_high: float
    b_star: float
    q_star: np.ndarray
    q_low: np.ndarray
    q_high: np.ndarray
    min_low: float
    min_high: float
    evaluated: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float


def _bracketed_root(f: Callable[[float], float], lo: float, hi: float, flo: float, fhi: float,
                    tol: float, ftol: float, max_iter: int = 200):
    """Illinois false position on a sign-changing bracket; returns root, bracket, |f|, evals."""
    evals = 0
    side = 0
    x, fx = lo, flo
    for _ in range(max_iter):
        x = (lo * fhi - hi * flo) / (fhi - flo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = f(x)
        evals += 1
        if fx == 0.0:
            return x, (x, x), 0.0, evals
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo < tol and abs(fx) < ftol:
            break
        if abs(fx) < 0.01 * ftol:
            break
    return x, (lo, hi), abs(fx), evals


def hausdorff_dim(p: GroupPresentation, L: int = 100, tol: float = 1e-12, *, tail: bool = True,
                  variant: str = "rep", ftol: float = 1e-12) -> DimResult:
    """Root of ``b -> P(-b log|f'|)`` on ``[0.501, 0.999]``.

    The pressure is decreasing in ``b``.  ``tail=True`` includes parabolic
    blocks beyond ``L`` through the quadrature states of the pressure module.
    """
    A = TruncatedAlphabet(p, L)
    zero = (0.0,) * p.m

    def f(b):
        return pressure(A, PotentialParams(zero, b), tail=tail, variant=variant).value

    lo, hi = DIM_BRACKET
    flo, fhi = f(lo), f(hi)
    if fhi > 0:
        log.warning("pressure positive at b=%.3f (%.3g); widening bracket to %.1f", hi, fhi, DIM_WIDENED)
        hi, fhi = DIM_WIDENED, f(DIM_WIDENED)
    if not (flo > 0 > fhi):
        raise SolverError(f"no sign change of the pressure on [{lo}, {hi}] (values {flo:.4g}, {fhi:.4g})")
    s, bracket, res, evals = _bracketed_root(f, lo, hi, flo, fhi, tol, ftol)
    return DimResult(float(s), (float(bracket[0]), float(bracket[1])), L, float(res), evals + 2)


def _as_alpha(alpha, m: int) -> np.ndarray:
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if a.shape != (m,):
        raise ValueError(f"alpha must have {m} coordinates")
    if not np.all(a > 0) or not np.all(np.isfinite(a)):
        raise ValueError("alpha must lie in the open positive orthant")
    return a


def _residual(A: TruncatedAlphabet, alpha: np.ndarray, x: np.ndarray, tail: bool) -> np.ndarray:
    m = len(alpha)
    value, grad, _ = pressure_gradient(A, PotentialParams(tuple(x[:m]), x[m], tuple(alpha)), tail=tail)
    return np.concatenate([[value], grad])


def solve_spectrum_point(p: GroupPresentation, alpha, L: int = 100, tol: float = 1e-10, *, tail: bool = True,
                         q0=None, b0: float | None = None, s: float | None = None, max_iter: int = 200,
                         fd_step: float = 1e-5, b_range: tuple[float, float] = (0.0, 1.0),
                         continuation: bool = True) -> SpectrumPoint:
    """Solve ``P = 0`` and ``grad_q P = 0`` for ``(q, b)`` by damped Newton.

    ``F`` uses the exact gradient of the matrix pressure (Perron vectors); the
    Jacobian of ``F`` is a central finite difference with step ``fd_step``.
    Steps are halved until they stay in ``{q > 0, b in b_range}`` and reduce ``|F|``.
    The default start is ``q = 1``, ``b = s``.  If Newton fails from there and
    ``continuation`` is set, the target is approached from ``alpha = 1`` in
    geometric steps, each solve starting from the previous one.
    """
    m = p.m
    alpha = _as_alpha(alpha, m)
    A = TruncatedAlphabet(p, L)
    if b0 is None:
        b0 = s if s is not None else hausdorff_dim(p, L, tail=tail).s
    start = np.concatenate([np.ones(m) if q0 is None else np.asarray(q0, dtype=float), [b0]])
    kw = dict(tol=tol, tail=tail, max_iter=max_iter, fd_step=fd_step, b_range=b_range)
    try:
        return _newton(A, alpha, start, **kw)
    except ConvergenceError:
        if not continuation:
            raise
    ratio = np.max(np.abs(np.log(alpha)))
    steps = max(2, int(math.ceil(ratio / math.log(2.0))))
    if s is None and q0 is not None:
        s = hausdorff_dim(A.presentation, L, tail=tail).s
    x = np.concatenate([np.ones(m), [s if s is not None else b0]])
    for k in range(steps + 1):
        a_k = alpha ** (k / steps)
        pt = _newton(A, a_k, x, **kw)
        x = np.concatenate([pt.q, [pt.b]])
    return pt


def _newton(A: TruncatedAlphabet, alpha: np.ndarray, x: np.ndarray, *, tol: float, tail: bool, max_iter: int,
            fd_step: float, b_range: tuple[float, float]) -> SpectrumPoint:
    m = len(alpha)
    L = A.L
    x = np.array(x, dtype=float)

    def inside(y):
        return np.all(y[:m] > 0) and b_range[0] < y[m] < b_range[1]

    if not inside(x):
        raise SolverError("initial guess outside the solver domain")
    F = _residual(A, alpha, x, tail)
    it = 0
    while np.max(np.abs(F)) >= tol:
        if it >= max_iter:
            raise ConvergenceError("Newton iteration did not converge", it, float(np.max(np.abs(F))))
        it += 1
        J = np.empty((m + 1, m + 1))
        for k in range(m + 1):
            # small q coordinates get a proportionally small step
            h = fd_step * min(1.0, abs(x[k])) if k < m else fd_step
            e = np.zeros(m + 1)
            e[k] = h
            lo_pt, hi_pt = x - e, x + e
            if not inside(lo_pt):
                J[:, k] = (_residual(A, alpha, hi_pt, tail) - F) / h
            else:
                J[:, k] = (_residual(A, alpha, hi_pt, tail) - _residual(A, alpha, lo_pt, tail)) / (2 * h)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}", it) from None
        norm = np.linalg.norm(F)
        lam = 1.0
        for _ in range(60):
            trial = x + lam * step
            if inside(trial):
                Ft = _residual(A, alpha, trial, tail)
                if np.linalg.norm(Ft) < (1.0 - 1e-4 * lam) * norm:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError("line search failed", it, float(np.max(np.abs(F))))
        x, F = trial, Ft
    params = PotentialParams(tuple(x[:m]), float(x[m]), tuple(alpha))
    st = gibbs_stats(A, params, tail=tail)
    return SpectrumPoint(
        alpha=alpha, q=x[:m].copy(), b=float(x[m]), residual_p=float(F[0]), residual_grad=F[1:].copy(),
        a_integrals=st.a_integrals, lyapunov=st.lyapunov, entropy=st.entropy, L=L, newton_iterations=it,
        distortion_bound=distortion_bound(A, params),
    )


def _solve_cold(args):
    p, alpha, L, tol, tail, s = args
    try:
        return solve_spectrum_point(p, alpha, L, tol, tail=tail, s=s)
    except (ArithmeticError, ValueError) as exc:
        return SpectrumFailure(np.asarray(alpha, dtype=float), str(exc), L)


def spectrum_grid(p: GroupPresentation, alpha_grid: Sequence, L: int = 100, tol: float = 1e-10, *,
                  tail: bool = True, workers: int = 1) -> list[SpectrumPoint | SpectrumFailure]:
    """Solve every grid point; failures are returned in place, not raised.

    With one worker the points are solved in order and each solve starts from
    the previous solution.  With several workers points are solved
    independently from the default start; the output order is the input order.
    """
    s = hausdorff_dim(p, L, tail=tail).s
    grid = [np.atleast_1d(np.asarray(a, dtype=float)) for a in alpha_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_cold, [(p, a, L, tol, tail, s) for a in grid]))
    out: list[SpectrumPoint | SpectrumFailure] = []
    prev: SpectrumPoint | None = None
    for a in grid:
        try:
            if prev is not None:
                try:
                    pt = solve_spectrum_point(p, a, L, tol, tail=tail, q0=prev.q, b0=prev.b)
                except (ArithmeticError, ValueError):
                    pt = solve_spectrum_point(p, a, L, tol, tail=tail, s=s)
            else:
                pt = solve_spectrum_point(p, a, L, tol, tail=tail, s=s)
            prev = pt
        except (ArithmeticError, ValueError) as exc:
            pt = SpectrumFailure(a, str(exc), L)
        out.append(pt)
    return out


def brute_force_oracle(p: GroupPresentation, alpha, q_grid: Sequence[float] | Sequence[Sequence[float]],
                       b_grid: Sequence[float], L: int = 100, *, tail: bool = True) -> OracleResult:
    """Grid scan for the largest ``b`` with ``min_q P(q, b) >= 0``.

    ``q_grid`` is one axis (shared by all cusps) or one axis per cusp; the
    Cartesian product is scanned exhaustively at every visited ``b``.  Because
    ``min_q P`` is non-increasing in ``b``, the sign change is located by
    bisection over ``b_grid``.  ``b_star`` interpolates linearly between the
    bracketing grid values and ``q_star`` is the matching interpolation of the
    minimizers.
    """
    m = p.m
    alpha = _as_alpha(alpha, m)
    axes = [np.asarray(q_grid, dtype=float)] * m if np.ndim(q_grid[0]) == 0 else [np.asarray(a, dtype=float) for a in q_grid]
    qs = np.array(list(itertools.product(*axes)))
    b_grid = np.asarray(sorted(b_grid), dtype=float)
    A = TruncatedAlphabet(p, L)
    floor = tuple(float(ax.min()) for ax in axes)
    cache: dict[int, tuple[float, np.ndarray]] = {}

    def min_over_q(k: int):
        if k in cache:
            return cache[k]
        b = float(b_grid[k])
        model = build_model(A, PotentialParams(floor, b, tuple(alpha)), tail)
        G = weight_matrix(model, PotentialParams((0.0,) * m, b))
        cusp = model.states.cusp
        best, arg = math.inf, None
        start = None
        for q in qs:
            W = G * np.exp(-(cusp @ q))[:, None]
            rho, v, u, _ = spectral_radius(W, start=start)
            start = (v, u)
            val = math.log(rho) + float(q @ alpha)
            if val < best:
                best, arg = val, q.copy()
        cache[k] = (best, arg)
        return cache[k]

    lo, hi = 0, len(b_grid) - 1
    if not (min_over_q(lo)[0] >= 0 > min_over_q(hi)[0]):
        raise SolverError("no sign change of min_q P on the b grid")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if min_over_q(mid)[0] >= 0:
            lo = mid
        else:
            hi = mid
    (mlo, qlo), (mhi, qhi) = cache[lo], cache[hi]
    t = mlo / (mlo - mhi)
    b_star = float(b_grid[lo] + t * (b_grid[hi] - b_grid[lo]))
    evaluated = {float(b_grid[k]): v[0] for k, v in sorted(cache.items())}
    return OracleResult(float(b_grid[lo]), float(b_grid[hi]), b_star, qlo + t * (qhi - qlo), qlo, qhi,
                        mlo, mhi, evaluated)


def distortion_exponent(p: GroupPresentation, cusp_index: int, l_range: tuple[int, int] = (20, 200), *,
                        sign: int = 1, terminal: tuple[int, int] = (0, 1)) -> SlopeFit:
    """Least-squares fit of ``sup log|(gamma^l)'|`` over block cylinders against ``log l``."""
    lo, hi = l_range
    if lo < 10 or hi > 1000 or lo >= hi:
        raise ValueError("l_range must satisfy 10 <= lo < hi <= 1000")
    ls = np.arange(lo, hi + 1, dtype=float)
    sup = distortion_law_sup(p, cusp_index, sign, ls, terminal)
    slope, intercept = np.polyfit(np.log(ls), sup, 1)
    return SlopeFit(float(slope), float(intercept))


def periodic_orbit_stats(p: GroupPresentation, cycle: Sequence[Letter], max_iter: int = 20,
                         tol: float = 1e-13) -> tuple[np.ndarray, float]:
    """Cusp-winding and Lyapunov averages along the periodic orbit of a letter cycle."""
    k = len(cycle)
    if k == 0:
        raise ValueError("empty cycle")
    for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]):
        if not admissible(a, b):
            raise ValueError(f"inadmissible junction {a} -> {b} in cycle")
    inv = [inverse_branch(p, a) for a in cycle]
    x0 = letter_arc(p, cycle[0]).midpoint
    pts = [0.0] * (k + 1)
    for _ in range(max_iter):
        y = x0
        pts[k] = y
        for j in range(k - 1, -1, -1):
            y = float(coeff_apply(inv[j].a, inv[j].b, y))
            pts[j] = y
        change = abs(math.remainder(pts[0] - x0, 2 * math.pi))
        x0 = pts[0]
        if change < tol:
            break
    pts[k] = pts[0]
    lyap = [float(coeff_log_denominator(inv[j].a, inv[j].b, pts[j + 1])) for j in range(k)]
    a_avg = np.mean([cusp_vector(a, p.m) for a in cycle], axis=0)
    return a_avg, float(np.mean(lyap))
