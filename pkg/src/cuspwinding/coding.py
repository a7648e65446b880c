"""Induced coding: letters, truncated alphabets, transitions, cylinders and branch derivatives.

A letter is either a single hyperbolic symbol ``Hyp(h)`` or a parabolic block
``Par(gamma, p, h)`` standing for the word ``gamma^p h``.  Signed generators are
``(index, sign)`` pairs with 0-based indices.

Derivatives of branch maps are evaluated on the image side: for a branch ``B``
with inverse ``(a, b)`` and ``y = B(x)``, ``log|B'(x)| = 2 log|conj(b) e^{iy} + conj(a)|``.
This stays accurate for long parabolic blocks where ``x`` sits very close to a
cusp and the direct formula cancels.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .moebius import (
    TWO_PI,
    BoundaryArc,
    DiscIsometry,
    GeometryError,
    coeff_apply,
    coeff_log_denominator,
    compose,
    intersect_arcs,
    inverse,
    isometric_arc,
    log_denominator_range,
    parabolic_power,
    power,
)
from .schottky import GroupPresentation

SignedGen = tuple[int, int]


class CodingError(ValueError):
    """Inadmissible words or bad alphabet parameters."""


def _gen_label(prefix: str, gen: SignedGen) -> str:
    j, s = gen
    return f"{prefix}{j + 1}" + ("" if s > 0 else "^-1")


@dataclass(frozen=True, order=True)
class Hyp:
    gen: SignedGen

    @property
    def terminal(self) -> SignedGen:
        return self.gen

    def __str__(self):
        return _gen_label("h", self.gen)


@dataclass(frozen=True, order=True)
class Par:
    cusp: int
    sign: int
    power: int
    terminal: SignedGen

    def __post_init__(self):
        if self.power < 1:
            raise CodingError("parabolic block power must be >= 1")
        if self.sign not in (1, -1):
            raise CodingError("sign must be +1 or -1")

    def __str__(self):
        return f"{_gen_label('g', (self.cusp, self.sign))}^{self.power} {_gen_label('h', self.terminal)}"


Letter = Union[Hyp, Par]


def tau(a: Letter) -> int:
    """Inducing time: number of symbols the letter consumes."""
    return 1 if isinstance(a, Hyp) else a.power + 1


def cusp_vector(a: Letter, m: int) -> np.ndarray:
    v = np.zeros(m)
    if isinstance(a, Par):
        v[a.cusp] = a.power - 1
    return v


def admissible(a: Letter, b: Letter) -> bool:
    """A letter may not be followed by the inverse of its last symbol."""
    j, s = a.terminal
    return not (isinstance(b, Hyp) and b.gen == (j, -s))


def symbols(p: GroupPresentation, a: Letter) -> list[DiscIsometry]:
    """Symbol string of a letter in itinerary order."""
    h = p.hyperbolic(*a.terminal)
    if isinstance(a, Hyp):
        return [h]
    return [p.parabolic(a.cusp, a.sign)] * a.power + [h]


@functools.lru_cache(maxsize=65536)
def branch_map(p: GroupPresentation, a: Letter) -> DiscIsometry:
    """Branch of the induced map on the letter cylinder: ``h`` or ``h o gamma^p``."""
    h = p.hyperbolic(*a.terminal)
    if isinstance(a, Hyp):
        return h
    return compose(h, power(p.parabolic(a.cusp, a.sign), a.power))


@functools.lru_cache(maxsize=65536)
def inverse_branch(p: GroupPresentation, a: Letter) -> DiscIsometry:
    return inverse(branch_map(p, a))


def map_arc(g: DiscIsometry, arc: BoundaryArc) -> BoundaryArc:
    """Image of an arc under an orientation preserving boundary map."""
    s = coeff_apply(g.a, g.b, arc.start)
    e = coeff_apply(g.a, g.b, arc.start + arc.length)
    length = float(np.mod(e - s, TWO_PI))
    mid = float(coeff_apply(g.a, g.b, arc.start + 0.5 * arc.length))
    if length == 0.0 or np.mod(mid - s, TWO_PI) > length:
        raise GeometryError("mapped arc is below angular resolution")
    return BoundaryArc(float(s), length)


def letter_arc(p: GroupPresentation, a: Letter) -> BoundaryArc:
    """One-letter cylinder: ``Delta(h)`` or ``gamma^-p(Delta(h))`` inside ``Delta(gamma)``."""
    h_arc = isometric_arc(p.hyperbolic(*a.terminal))
    if isinstance(a, Hyp):
        return h_arc
    g = p.parabolic(a.cusp, a.sign)
    pulled = map_arc(inverse(power(g, a.power)), h_arc)
    arc = intersect_arcs(isometric_arc(g), pulled)
    if arc is None:
        raise GeometryError(f"empty cylinder for {a}")
    return arc


def image_arc(p: GroupPresentation, a: Letter) -> BoundaryArc:
    """Image of the letter cylinder under its branch: the circle minus ``Delta(h^-1)``."""
    return isometric_arc(inverse(p.hyperbolic(*a.terminal))).complement()


def _check_word(word: Sequence[Letter]) -> None:
    if not word:
        raise CodingError("empty word")
    for a, b in zip(word[:-1], word[1:]):
        if not admissible(a, b):
            raise CodingError(f"inadmissible junction {a} -> {b}")


def cylinder_arc(p: GroupPresentation, word: Sequence[Letter]) -> BoundaryArc:
    """Arc of points whose induced itinerary starts with ``word``."""
    _check_word(word)
    arc = letter_arc(p, word[-1])
    for a in reversed(word[:-1]):
        pulled = map_arc(inverse_branch(p, a), arc)
        arc = intersect_arcs(letter_arc(p, a), pulled)
        if arc is None:
            raise GeometryError("empty cylinder")
    return arc


def symbol_cylinder_arc(p: GroupPresentation, word: Sequence[Letter]) -> BoundaryArc:
    """Same arc built one symbol at a time: ``Delta(s_j) & s_j^-1(arc of the rest)``."""
    _check_word(word)
    syms = [g for a in word for g in symbols(p, a)]
    arc = isometric_arc(syms[-1])
    for g in reversed(syms[:-1]):
        arc = intersect_arcs(isometric_arc(g), map_arc(inverse(g), arc))
        if arc is None:
            raise GeometryError("empty cylinder")
    return arc


def rep_point(p: GroupPresentation, word: Sequence[Letter], policy: str = "pullback") -> float:
    """Representative angle of a cylinder.

    ``pullback`` pulls the midpoint of the last letter cylinder back through the
    inverse branches; ``midpoint`` takes the angular midpoint of the cylinder arc.
    Both agree for one-letter words.  The pullback point stays resolvable when the
    arc itself is shorter than the angular spacing of doubles.
    """
    if policy == "midpoint" or len(word) == 1:
        return cylinder_arc(p, word).midpoint
    if policy != "pullback":
        raise ValueError(f"unknown policy {policy!r}")
    _check_word(word)
    theta = letter_arc(p, word[-1]).midpoint
    for a in reversed(word[:-1]):
        g = inverse_branch(p, a)
        theta = float(coeff_apply(g.a, g.b, theta))
    return theta


def log_deriv_range(p: GroupPresentation, word: Sequence[Letter]) -> tuple[float, float]:
    """(inf, sup) of ``log|B'|`` for the first letter's branch over the word cylinder."""
    _check_word(word)
    target = cylinder_arc(p, word[1:]) if len(word) > 1 else image_arc(p, word[0])
    g = inverse_branch(p, word[0])
    lo, hi = log_denominator_range(g.a, g.b, target.start, target.length)
    return float(lo), float(hi)


def log_deriv_at(p: GroupPresentation, a: Letter, theta: float) -> float:
    """``log|B_a'|`` at the point of the letter cylinder with image angle ``theta``."""
    g = inverse_branch(p, a)
    return float(coeff_log_denominator(g.a, g.b, theta))


def admissible_geometric(p: GroupPresentation, a: Letter, b: Letter, tol: float = 1e-9) -> bool:
    """Markov inclusion: the cylinder of ``b`` lies in the branch image of ``a``'s cylinder."""
    cyl = letter_arc(p, a)
    img = map_arc(branch_map(p, a), cyl)
    return img.contains_arc(letter_arc(p, b), tol=tol) and img.length < TWO_PI - tol


@dataclass(frozen=True)
class StateArrays:
    """Vectorized description of a family of letters (or tail states).

    ``term`` indexes the signed hyperbolic list, ``first`` the signed hyperbolic
    list for Hyp letters (-1 for parabolic blocks), ``ginv`` is the inverse
    parabolic block (identity for Hyp letters), ``cusp`` the winding values.
    """

    term: np.ndarray
    first: np.ndarray
    ginv_a: np.ndarray
    ginv_b: np.ndarray
    cusp: np.ndarray
    start: np.ndarray
    length: np.ndarray
    mid: np.ndarray

    def __len__(self):
        return len(self.term)


class HyperbolicData:
    """Signed hyperbolic generators, their inverses and arcs, in letter order."""

    def __init__(self, p: GroupPresentation):
        self.gens = p.signed_hyperbolics()
        hs = [p.hyperbolic(*g) for g in self.gens]
        inv = [inverse(h) for h in hs]
        self.inv_a = np.array([g.a for g in inv])
        self.inv_b = np.array([g.b for g in inv])
        self.inverse_index = np.array([self.gens.index((j, -s)) for j, s in self.gens])
        arcs = [isometric_arc(h) for h in hs]
        self.start = np.array([a.start for a in arcs])
        self.length = np.array([a.length for a in arcs])


def pair_log_derivatives(hyp: HyperbolicData, rows: StateArrays, cols: StateArrays) -> np.ndarray:
    """``log|B_r'|`` at the pullback of each column midpoint (rows x cols)."""
    ha = hyp.inv_a[rows.term][:, None]
    hb = hyp.inv_b[rows.term][:, None]
    y_mid = cols.mid[None, :]
    out = coeff_log_denominator(ha, hb, y_mid)
    y = coeff_apply(ha, hb, y_mid)
    out += coeff_log_denominator(rows.ginv_a[:, None], rows.ginv_b[:, None], y)
    return out


def composite_inverse(hyp: HyperbolicData, rows: StateArrays) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``G^-1 o h^-1`` per row."""
    ga, gb = rows.ginv_a, rows.ginv_b
    ha, hb = hyp.inv_a[rows.term], hyp.inv_b[rows.term]
    return ga * ha + gb * np.conj(hb), ga * hb + gb * np.conj(ha)


def pair_log_derivative_ranges(hyp: HyperbolicData, rows: StateArrays, cols: StateArrays):
    """(inf, sup) of ``log|B_r'|`` over the 2-cylinders [r, c]."""
    a, b = composite_inverse(hyp, rows)
    return log_denominator_range(a[:, None], b[:, None], cols.start[None, :], cols.length[None, :])


def admissibility_mask(hyp: HyperbolicData, rows: StateArrays, cols: StateArrays) -> np.ndarray:
    return cols.first[None, :] != hyp.inverse_index[rows.term][:, None]


def parabolic_states(p: GroupPresentation, hyp: HyperbolicData, powers, cusps=None) -> StateArrays:
    """States for parabolic blocks with real powers, for every signed cusp and terminal.

    Ordering is (cusp, sign, power, terminal), matching the alphabet.
    """
    powers = np.asarray(powers, dtype=float)
    cusps = range(p.m) if cusps is None else cusps
    terms, ga, gb, cusp, start, length = [], [], [], [], [], []
    nh = len(hyp.gens)
    for i in cusps:
        for sign in (1, -1):
            g = p.parabolic(i, sign)
            ia, ib = parabolic_power(g, -powers)
            for k in range(nh):
                s = coeff_apply(ia, ib, hyp.start[k])
                e = coeff_apply(ia, ib, hyp.start[k] + hyp.length[k])
                # block cylinders are short, so the signed difference cannot wrap
                ln = np.maximum(np.angle(np.exp(1j * (e - s))), 0.0)
                terms.append(np.full(powers.shape, k))
                ga.append(ia)
                gb.append(ib)
                c = np.zeros((len(powers), p.m))
                c[:, i] = powers - 1.0
                cusp.append(c)
                start.append(s)
                length.append(ln)
    # reorder from (cusp, sign, terminal, power) to (cusp, sign, power, terminal)
    blocks = 2 * len(cusps)

    def arrange(parts, tail_shape=()):
        arr = np.array(parts).reshape((blocks, nh, len(powers)) + tail_shape)
        return np.swapaxes(arr, 1, 2).reshape((-1,) + tail_shape)
    start_arr = arrange(start)
    length_arr = arrange(length)
    return StateArrays(
        term=arrange(terms).astype(int),
        first=np.full(blocks * nh * len(powers), -1),
        ginv_a=arrange(ga),
        ginv_b=arrange(gb),
        cusp=arrange(cusp, (p.m,)),
        start=np.mod(start_arr, TWO_PI),
        length=length_arr,
        mid=np.mod(start_arr + 0.5 * length_arr, TWO_PI),
    )


def _concat(parts: list[StateArrays]) -> StateArrays:
    return StateArrays(*(np.concatenate([getattr(s, f) for s in parts]) for f in StateArrays.__dataclass_fields__))


@dataclass(frozen=True)
class TruncatedAlphabet:
    presentation: GroupPresentation
    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise CodingError("truncation L must be an integer >= 1")

    @cached_property
    def letters(self) -> tuple[Letter, ...]:
        p = self.presentation
        out: list[Letter] = [Hyp(g) for g in p.signed_hyperbolics()]
        for i in range(p.m):
            for sign in (1, -1):
                for power_ in range(1, self.L + 1):
                    out.extend(Par(i, sign, power_, t) for t in p.signed_hyperbolics())
        return tuple(out)

    @cached_property
    def index(self) -> dict[Letter, int]:
        return {a: k for k, a in enumerate(self.letters)}

    def __len__(self):
        return 2 * self.presentation.n + 4 * self.presentation.m * self.presentation.n * self.L

    @property
    def m(self) -> int:
        return self.presentation.m

    @cached_property
    def hyp(self) -> HyperbolicData:
        return HyperbolicData(self.presentation)

    @cached_property
    def states(self) -> StateArrays:
        """Vectorized geometry of all letters, in letter order."""
        p, hyp = self.presentation, self.hyp
        nh = len(hyp.gens)
        hyp_states = StateArrays(
            term=np.arange(nh),
            first=np.arange(nh),
            ginv_a=np.ones(nh, dtype=complex),
            ginv_b=np.zeros(nh, dtype=complex),
            cusp=np.zeros((nh, p.m)),
            start=hyp.start.copy(),
            length=hyp.length.copy(),
            mid=np.mod(hyp.start + 0.5 * hyp.length, TWO_PI),
        )
        # integer blocks through repeated squaring, arcs through the exact formula
        par = parabolic_states(p, hyp, np.arange(1, self.L + 1))
        ga, gb = [], []
        for a in self.letters[nh:]:
            g = inverse(power(p.parabolic(a.cusp, a.sign), a.power))
            ga.append(g.a)
            gb.append(g.b)
        par = StateArrays(par.term, par.first, np.array(ga), np.array(gb), par.cusp, par.start, par.length, par.mid)
        return _concat([hyp_states, par])

    @cached_property
    def cusp_matrix(self) -> np.ndarray:
        return self.states.cusp

    @cached_property
    def adjacency(self) -> np.ndarray:
        return admissibility_mask(self.hyp, self.states, self.states)

    @cached_property
    def log_derivatives(self) -> np.ndarray:
        """``log|B_a'(rep[a, b])|`` for all letter pairs (inadmissible entries included)."""
        return pair_log_derivatives(self.hyp, self.states, self.states)

    @cached_property
    def log_derivative_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        return pair_log_derivative_ranges(self.hyp, self.states, self.states)

    @cached_property
    def max_pair_variation(self) -> float:
        """Largest range of ``log|B_a'|`` over an admissible 2-cylinder."""
        lo, hi = self.log_derivative_ranges
        return float(np.max(np.where(self.adjacency, hi - lo, 0.0)))


def build_alphabet(p: GroupPresentation, L: int) -> TruncatedAlphabet:
    return TruncatedAlphabet(p, L)


def letter_log_deriv_ranges(p: GroupPresentation, powers) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-letter (inf, sup) of ``log|B'|`` for parabolic blocks of the given powers.

    Returns (lo, hi, cusp) with rows in (cusp, sign, power, terminal) order.
    """
    hyp = HyperbolicData(p)
    st = parabolic_states(p, hyp, powers)
    a, b = composite_inverse(hyp, st)
    inv_term = hyp.inverse_index[st.term]
    # image of a letter cylinder is the complement of Delta(h^-1)
    start = hyp.start[inv_term] + hyp.length[inv_term]
    length = TWO_PI - hyp.length[inv_term]
    lo, hi = log_denominator_range(a, b, start, length)
    return lo, hi, st.cusp


def distortion_law_sup(p: GroupPresentation, cusp: int, sign: int, powers, terminal: SignedGen = (0, 1)) -> np.ndarray:
    """sup of ``log|(gamma^l)'|`` over the cylinders of ``Par(gamma, l, terminal)``."""
    g = p.parabolic(cusp, sign)
    ia, ib = parabolic_power(g, -np.asarray(powers, dtype=float))
    # gamma^l maps the cylinder onto Delta(terminal)
    arc = isometric_arc(p.hyperbolic(*terminal))
    _, hi = log_denominator_range(ia, ib, arc.start, arc.length)
    return hi


def log_sum_exp(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    top = float(np.max(x))
    if not math.isfinite(top):
        return top
    return top + math.log(float(np.sum(np.exp(x - top))))
