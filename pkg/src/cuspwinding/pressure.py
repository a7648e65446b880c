"""Truncated pressure of cusp-winding potentials via weighted transfer matrices.

The potential on a letter ``a`` followed by ``b`` is

    phi(a, b) = <q, alpha - cusp(a)> - b_exp * log|B_a'(rep[a, b])|

and the pressure of the truncated shift is ``log`` of the Perron root of the
matrix of ``exp(phi)`` over admissible pairs.

Optionally the parabolic blocks with power above ``L`` are kept through a
quadrature in the (continuous) power: extra states carry real powers and
quadrature weights, which multiply the columns of the matrix.  The rows of a
tail state use the exact real power of the parabolic generator.  This makes
the truncation error in ``L`` negligible, which matters close to ``b = 1/2``
where block sums converge like ``L^(1 - 2b)``.
"""
from __future__ import annotations

import enum
import functools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.sparse.csgraph import connected_components
from scipy.special import roots_jacobi

from .coding import (
    Letter,
    StateArrays,
    TruncatedAlphabet,
    _concat,
    admissibility_mask,
    letter_log_deriv_ranges,
    log_sum_exp,
    pair_log_derivative_ranges,
    pair_log_derivatives,
    parabolic_states,
)
from .schottky import GroupPresentation

log = logging.getLogger(__name__)

POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000
# weights below exp(-EXP_CUT) are dropped from the tail model
EXP_CUT = 700.0

TAIL_EXPLICIT = 8
TAIL_BINS = 40
TAIL_GL_NODES = 6
TAIL_GJ_NODES = 24


class PressureError(ArithmeticError):
    pass


class InfinitePressure(PressureError):
    """Parameters outside the region where the pressure is finite."""


class ConvergenceError(PressureError):
    def __init__(self, msg: str, iterations: int = 0, last_change: float = float("nan")):
        super().__init__(f"{msg} (iterations={iterations}, last change={last_change:.3g})")
        self.iterations = iterations
        self.last_change = last_change


@dataclass(frozen=True)
class PotentialParams:
    q: tuple[float, ...]
    b: float
    alpha: tuple[float, ...] = ()

    def __post_init__(self):
        q = tuple(float(x) for x in np.atleast_1d(self.q))
        alpha = tuple(float(x) for x in np.atleast_1d(self.alpha)) if len(np.atleast_1d(self.alpha)) else (0.0,) * len(q)
        if len(alpha) != len(q):
            raise ValueError("q and alpha must have the same length")
        if not all(math.isfinite(x) for x in q + alpha + (float(self.b),)):
            raise ValueError("potential parameters must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "b", float(self.b))

    @property
    def q_arr(self) -> np.ndarray:
        return np.array(self.q)

    @property
    def alpha_arr(self) -> np.ndarray:
        return np.array(self.alpha)

    @property
    def m(self) -> int:
        return len(self.q)

    def replace(self, **kw) -> "PotentialParams":
        d = {"q": self.q, "b": self.b, "alpha": self.alpha}
        d.update(kw)
        return PotentialParams(**d)


class Finiteness(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"


@dataclass(frozen=True)
class PressureResult:
    value: float
    distortion_bound: float
    L: int
    iterations: int
    converged: bool
    tail_estimate: float | None = None


@dataclass(frozen=True)
class GibbsStats:
    """Equilibrium chain of a (possibly tail augmented) transfer matrix.

    ``letter_marginal`` and ``pair_measure`` cover the alphabet letters followed
    by the tail states, if any; ``tail_mass`` is the marginal mass of the tail.
    """

    letter_marginal: np.ndarray
    pair_measure: np.ndarray
    a_integrals: np.ndarray
    lyapunov: float
    entropy: float
    pressure: float
    distortion_bound: float
    tail_mass: float = 0.0
    potential_integral: float = float("nan")


@dataclass(frozen=True)
class LetterSumTrend:
    Ls: tuple[int, ...]
    log_sums: tuple[float, ...]
    ratio: float
    divergent: bool


def region(params: PotentialParams) -> Finiteness:
    q = params.q_arr
    if np.any(q < 0):
        return Finiteness.INFINITE
    if np.all(q > 0):
        return Finiteness.FINITE if params.b >= 0 else Finiteness.INFINITE
    return Finiteness.FINITE if params.b > 0.5 else Finiteness.INFINITE


def letter_sum_trend(p: GroupPresentation, params: PotentialParams, Ls: Sequence[int] = (100, 1000, 10000),
                     threshold: float = 1e-3) -> LetterSumTrend:
    """Growth of ``sum_a exp(sup phi|[a])`` over one-letter cylinders as ``L`` grows.

    The ratio compares the sums over the last two windows of powers
    ``(Ls[-2], Ls[-1]]`` and ``(Ls[-3], Ls[-2]]``.  Power law terms ``l^-sigma``
    give ``10^(1 - sigma)`` for decade windows, so a ratio above ``1 - threshold``
    signals divergence.
    """
    Ls = tuple(int(x) for x in Ls)
    lo, hi, cusp = letter_log_deriv_ranges(p, np.arange(1, Ls[-1] + 1))
    b = params.b
    sup_logd = -b * (lo if b >= 0 else hi)
    phi = sup_logd - cusp @ params.q_arr
    power = np.rint(cusp.sum(axis=1)).astype(int) + 1
    # hyperbolic letters are bounded terms, they only shift the sums
    hyp = 2 * p.n * [0.0]
    log_sums = tuple(log_sum_exp(np.concatenate([phi[power <= L], hyp])) for L in Ls)
    windows = [log_sum_exp(phi[(power > lo_) & (power <= hi_)]) for lo_, hi_ in zip(Ls[:-1], Ls[1:])]
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = math.exp(min(windows[-1] - windows[-2], 700.0)) if math.isfinite(windows[-2]) else float("nan")
    if windows[-1] == -math.inf:
        ratio = 0.0
    return LetterSumTrend(Ls, log_sums, ratio, bool(ratio > 1.0 - threshold))


def finiteness_check(p: GroupPresentation, params: PotentialParams, cross_check: bool = True) -> Finiteness:
    """Closed-form finiteness region, optionally compared with the letter-sum trend."""
    result = region(params)
    if params.m != p.m:
        raise ValueError(f"parameter dimension {params.m} does not match m={p.m}")
    if cross_check:
        trend = letter_sum_trend(p, params)
        if trend.divergent != (result is Finiteness.INFINITE):
            warnings.warn(
                f"letter-sum trend (ratio {trend.ratio:.4g}) disagrees with closed form ({result.value}); "
                "parameters are close to the region boundary",
                RuntimeWarning, stacklevel=2)
    return result


def tail_nodes(L: int, b: float, q_i: float) -> tuple[np.ndarray, np.ndarray]:
    """Real powers and weights representing parabolic blocks with power > L.

    Sum of ``f(l)`` over ``l > L`` is approximated by explicit terms for
    ``L < l <= L + 8``, Gauss-Legendre on doubling bins for the integral from
    about ``L + 8.5`` on, and a Gauss-Jacobi rule with weight ``x^(-2b)`` after the
    last bin when ``q_i = 0``.
    """
    explicit = np.arange(L + 1, L + TAIL_EXPLICIT + 1, dtype=float)
    x0 = L + TAIL_EXPLICIT + 0.5
    # midpoint rule: sum f(l) = int f + f'(x0)/24 + ...; for f ~ x^-2b e^-qx that is
    # the same as starting the integral later by -f'/(24 f)
    x0 += (2.0 * b / x0 + q_i) / 24.0
    nodes, weights = _unit_gauss_legendre()
    ps, ws = [explicit], [np.ones_like(explicit)]
    lo = x0
    for _ in range(TAIL_BINS):
        if q_i > 0 and q_i * (lo - 1.0) > EXP_CUT:
            break
        ps.append(lo + lo * nodes)
        ws.append(lo * weights)
        lo *= 2.0
    else:
        if q_i * (lo - 1.0) <= EXP_CUT:
            if b <= 0.5:
                raise InfinitePressure("tail model needs b > 1/2 when some q_i vanish")
            pj, wj = _gauss_jacobi_tail(lo, b)
            ps.append(pj)
            ws.append(wj)
    p = np.concatenate(ps)
    w = np.concatenate(ws)
    keep = q_i * (p - 1.0) <= EXP_CUT
    return p[keep], w[keep]


@functools.lru_cache(maxsize=None)
def _unit_gauss_legendre():
    x, w = leggauss(TAIL_GL_NODES)
    # map [-1, 1] to [0, 1]; bins are [X, 2X] = X + X [0, 1]
    return 0.5 * (x + 1.0), 0.5 * w


def _gauss_jacobi_tail(xmax: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes for ``int_xmax^inf f(x) dx`` when ``f(x) ~ x^(-2b)``.

    With ``u = xmax/x`` the integral is ``xmax int_0^1 f(xmax/u) u^-2 du``; the factor
    ``u^(2b-2)`` is the Jacobi weight and the rest is smooth.
    """
    beta = 2.0 * b - 2.0
    x, w = roots_jacobi(TAIL_GJ_NODES, 0.0, beta)
    u = 0.5 * (x + 1.0)
    w = w / 2.0 ** (beta + 1.0)
    return xmax / u, w * xmax / u ** 2 / u ** beta


@dataclass
class TransferModel:
    """States, geometry and weights of a transfer matrix."""

    states: StateArrays
    logd: np.ndarray
    mask: np.ndarray
    omega: np.ndarray
    n_core: int
    alphabet: TruncatedAlphabet
    _ranges: tuple | None = field(default=None, repr=False)

    def ranges(self):
        if self._ranges is None:
            if len(self.states) == self.n_core:
                self._ranges = self.alphabet.log_derivative_ranges
            else:
                self._ranges = pair_log_derivative_ranges(self.alphabet.hyp, self.states, self.states)
        return self._ranges


def _core_model(A: TruncatedAlphabet) -> TransferModel:
    n = len(A)
    return TransferModel(A.states, A.log_derivatives, A.adjacency, np.ones(n), n, A)


_TAIL_CACHE: dict = {}


def _tail_key(A: TruncatedAlphabet, params: PotentialParams):
    nodes = tuple(tail_nodes(A.L, params.b, qi) for qi in params.q)
    key = (A, tuple((n[0].tobytes(), n[1].tobytes()) for n in nodes))
    return key, nodes


def build_model(A: TruncatedAlphabet, params: PotentialParams, tail: bool = False) -> TransferModel:
    """Transfer model for ``A``; with ``tail`` the blocks beyond ``L`` are added."""
    if params.m != A.m:
        raise ValueError(f"parameter dimension {params.m} does not match m={A.m}")
    if not tail:
        # a finite alphabet has finite pressure for every potential
        return _core_model(A)
    if region(params) is Finiteness.INFINITE:
        raise InfinitePressure(f"pressure is infinite at q={params.q}, b={params.b}")
    key, nodes = _tail_key(A, params)
    cached = _TAIL_CACHE.get(key)
    if cached is not None:
        return cached
    p, hyp = A.presentation, A.hyp
    parts, omegas = [], []
    for i, (powers, weights) in enumerate(nodes):
        if len(powers) == 0:
            continue
        st = parabolic_states(p, hyp, powers, cusps=(i,))
        parts.append(st)
        omegas.append(np.tile(np.repeat(weights, len(hyp.gens)), 2))
    if not parts:
        return _core_model(A)
    tail_st = _concat(parts)
    core = A.states
    full = _concat([core, tail_st])
    n = len(core)
    ntot = len(full)
    logd = np.empty((ntot, ntot))
    logd[:n, :n] = A.log_derivatives
    logd[:n, n:] = pair_log_derivatives(hyp, core, tail_st)
    logd[n:, :] = pair_log_derivatives(hyp, tail_st, full)
    mask = admissibility_mask(hyp, full, full)
    omega = np.concatenate([np.ones(n)] + omegas)
    model = TransferModel(full, logd, mask, omega, n, A)
    if len(_TAIL_CACHE) > 32:
        _TAIL_CACHE.clear()
    _TAIL_CACHE[key] = model
    return model


def weight_matrix(model: TransferModel, params: PotentialParams, variant: str = "rep") -> np.ndarray:
    """``exp(phi)`` without the constant ``<q, alpha>``, times the column weights."""
    if variant == "rep":
        logd = model.logd
    elif variant in ("sup", "inf"):
        lo, hi = model.ranges()
        # sup of phi uses the smallest derivative when b >= 0
        use_lo = (variant == "sup") == (params.b >= 0)
        logd = lo if use_lo else hi
    else:
        raise ValueError(f"unknown weight variant {variant!r}")
    row = model.states.cusp @ params.q_arr
    with np.errstate(under="ignore"):
        W = np.exp(-params.b * logd - row[:, None])
    W *= model.omega[None, :]
    W[~model.mask] = 0.0
    return W


def build_weight_matrix(A: TruncatedAlphabet, params: PotentialParams, variant: str = "rep") -> np.ndarray:
    """Weights ``exp(<q, alpha - cusp(a)> - b log|B_a'(rep[a, b])|)`` on admissible pairs."""
    model = build_model(A, params)
    shift = float(np.dot(params.q_arr, params.alpha_arr))
    return weight_matrix(model, params, variant) * math.exp(shift)


def _power_iteration(M: np.ndarray, tol: float, max_iter: int, start=None):
    v = np.ones(M.shape[0]) if start is None else np.array(start, dtype=float)
    v /= v.sum()
    rho_old = 0.0
    change = float("inf")
    for k in range(1, max_iter + 1):
        w = M @ v
        rho = w.sum()
        if not rho > 0.0:
            raise ConvergenceError("matrix annihilates the iterate", k)
        v = w / rho
        change = abs(rho - rho_old)
        if change <= tol * rho:
            return rho, v, k
        rho_old = rho
    raise ConvergenceError("power iteration did not converge", max_iter, change)


def spectral_radius(W: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER, start=None):
    """Perron root with right and left eigenvectors (each normalized to sum 1).

    Returns ``(rho, right, left, iterations)``.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or np.any(W < 0):
        raise ValueError("need a square nonnegative matrix")
    rho_r, v, it_r = _power_iteration(W, tol, max_iter, None if start is None else start[0])
    rho_l, u, it_l = _power_iteration(W.T, tol, max_iter, None if start is None else start[1])
    # Rayleigh quotient with both vectors is second order accurate
    rho = float(u @ (W @ v) / (u @ v))
    if not math.isfinite(rho):
        rho = rho_r
    return rho, v, u, max(it_r, it_l)


@dataclass
class _Solved:
    model: TransferModel
    params: PotentialParams
    W: np.ndarray
    rho: float
    v: np.ndarray
    u: np.ndarray
    iterations: int

    @property
    def value(self) -> float:
        return math.log(self.rho) + float(np.dot(self.params.q_arr, self.params.alpha_arr))

    def marginal(self) -> np.ndarray:
        w = self.u * self.v
        return w / w.sum()

    def pair(self) -> np.ndarray:
        P = self.u[:, None] * self.W * self.v[None, :]
        return P / P.sum()

    def a_integrals(self) -> np.ndarray:
        return self.marginal() @ self.model.states.cusp

    def lyapunov(self, pair=None) -> float:
        pair = self.pair() if pair is None else pair
        return float(np.sum(pair[self.model.mask] * self.model.logd[self.model.mask]))


def solve(A: TruncatedAlphabet, params: PotentialParams, *, tail: bool = False, variant: str = "rep",
          tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> _Solved:
    model = build_model(A, params, tail)
    W = weight_matrix(model, params, variant)
    rho, v, u, it = spectral_radius(W, tol, max_iter)
    return _Solved(model, params, W, rho, v, u, it)


def distortion_bound(A: TruncatedAlphabet, params: PotentialParams) -> float:
    return abs(params.b) * A.max_pair_variation


def tail_sum_estimate(L: int, params: PotentialParams) -> float | None:
    """``sum_{l > L} l^(-2b) exp(-q_min l)`` when ``q_min > 0``."""
    qmin = min(params.q)
    if qmin <= 0:
        return None
    powers, weights = tail_nodes(L, params.b, qmin)
    return float(np.sum(weights * powers ** (-2.0 * params.b) * np.exp(-qmin * powers)))


def pressure(A: TruncatedAlphabet, params: PotentialParams, *, tail: bool = False, variant: str = "rep",
             tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> PressureResult:
    """Log Perron root of the truncated weight matrix.

    ``tail=True`` adds the quadrature states for parabolic powers above ``A.L``;
    ``variant`` selects representative-point (``rep``) or sup/inf weights.
    """
    s = solve(A, params, tail=tail, variant=variant, tol=tol, max_iter=max_iter)
    return PressureResult(s.value, distortion_bound(A, params), A.L, s.iterations, True,
                          tail_sum_estimate(A.L, params))


def pressure_gradient(A: TruncatedAlphabet, params: PotentialParams, *, tail: bool = False):
    """Value, q-gradient and b-derivative of the matrix pressure from one eigen-solve.

    The derivatives are the exact derivatives of ``log rho`` of the matrix:
    ``dP/dq_i = alpha_i - int a_i`` and ``dP/db = -lyapunov``.
    """
    s = solve(A, params, tail=tail)
    return s.value, params.alpha_arr - s.a_integrals(), -s.lyapunov()


def gibbs_stats(A: TruncatedAlphabet, params: PotentialParams, *, tail: bool = False) -> GibbsStats:
    s = solve(A, params, tail=tail)
    model = s.model
    pair = s.pair()
    marg = s.marginal()
    m = model.mask & (pair > 0)
    # per-letter transition probabilities; tail columns carry their quadrature weight
    logP = (np.log(s.W[m]) - np.log(np.broadcast_to(model.omega[None, :], s.W.shape)[m])
            + np.log(np.broadcast_to(s.v[None, :], s.W.shape)[m])
            - np.log(np.broadcast_to(s.v[:, None], s.W.shape)[m]) - math.log(s.rho))
    entropy = float(-np.sum(pair[m] * logP))
    phi = -params.b * model.logd - (model.states.cusp @ params.q_arr)[:, None] + float(
        np.dot(params.q_arr, params.alpha_arr))
    return GibbsStats(
        letter_marginal=marg,
        pair_measure=pair,
        a_integrals=marg @ model.states.cusp,
        lyapunov=float(np.sum(pair[m] * model.logd[m])),
        entropy=entropy,
        pressure=s.value,
        distortion_bound=distortion_bound(A, params),
        tail_mass=float(marg[model.n_core:].sum()),
        potential_integral=float(np.sum(pair[m] * phi[m])),
    )


def _subset_indices(A: TruncatedAlphabet, subset: Iterable) -> np.ndarray:
    idx = []
    for item in subset:
        idx.append(int(item) if isinstance(item, (int, np.integer)) else A.index[item])
    return np.array(sorted(set(idx)), dtype=int)


def pressure_subsystem(A: TruncatedAlphabet, subset: Iterable[Letter | int], params: PotentialParams, *,
                       variant: str = "rep", tol: float = POWER_TOL) -> PressureResult:
    """Pressure of the matrix restricted to a subset of letters."""
    idx = _subset_indices(A, subset)
    if len(idx) == 0:
        raise PressureError("empty subsystem")
    model = build_model(A, params)
    W = weight_matrix(model, params, variant)[np.ix_(idx, idx)]
    adj = model.mask[np.ix_(idx, idx)]
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    if ncomp != 1:
        raise PressureError(f"subsystem is reducible ({ncomp} strong components)")
    a = adj.astype(int)
    if not np.all(a @ a > 0):
        warnings.warn("subsystem lacks single connecting letters for some pairs", RuntimeWarning, stacklevel=2)
    rho, _, _, it = spectral_radius(W, tol)
    value = math.log(rho) + float(np.dot(params.q_arr, params.alpha_arr))
    return PressureResult(value, distortion_bound(A, params), A.L, it, True)


def pressure_limit(p: GroupPresentation, params: PotentialParams, L0: int = 50, tol: float = 1e-8,
                   max_L: int = 3200, tail: bool = False) -> tuple[PressureResult, list[PressureResult]]:
    """Double ``L`` until successive pressures differ by less than ``tol``."""
    history = []
    L = L0
    while True:
        res = pressure(TruncatedAlphabet(p, L), params, tail=tail)
        history.append(res)
        if len(history) > 1 and abs(history[-1].value - history[-2].value) < tol:
            return res, history
        if 2 * L > max_L:
            log.warning("pressure not settled in L up to %d (last change %.3g)", L,
                        abs(history[-1].value - history[-2].value) if len(history) > 1 else float("nan"))
            return res, history
        L *= 2
