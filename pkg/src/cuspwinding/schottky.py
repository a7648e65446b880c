"""Generalized Schottky presentations: storage, validation, presets and JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema

from .moebius import (
    BoundaryArc,
    DiscIsometry,
    GeometryError,
    Kind,
    classify,
    conjugate,
    inverse,
    isometric_arc,
)

GAP_TOL = 1e-6

# generator parameters of the presets; see README for why these values
PRESET_T = 4.0
PRESET_S = 3.0


class PresentationError(ValueError):
    """Config parse, schema, normalization or validation failure."""


_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_GEN = {
    "type": "object",
    "properties": {"name": {"type": "string"}, "a": _COMPLEX, "b": _COMPLEX},
    "required": ["name", "a", "b"],
    "additionalProperties": False,
}
CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "parabolic": {"type": "array", "items": _GEN, "minItems": 1},
        "hyperbolic": {"type": "array", "items": _GEN, "minItems": 1},
    },
    "required": ["parabolic", "hyperbolic"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class GroupPresentation:
    parabolics: tuple[DiscIsometry, ...]
    hyperbolics: tuple[DiscIsometry, ...]

    def __post_init__(self):
        object.__setattr__(self, "parabolics", tuple(self.parabolics))
        object.__setattr__(self, "hyperbolics", tuple(self.hyperbolics))
        if not self.parabolics or not self.hyperbolics:
            raise PresentationError("need at least one parabolic and one hyperbolic generator")

    @property
    def m(self) -> int:
        return len(self.parabolics)

    @property
    def n(self) -> int:
        return len(self.hyperbolics)

    def parabolic(self, i: int, sign: int = 1) -> DiscIsometry:
        g = self.parabolics[i]
        return g if sign > 0 else inverse(g)

    def hyperbolic(self, j: int, sign: int = 1) -> DiscIsometry:
        h = self.hyperbolics[j]
        return h if sign > 0 else inverse(h)

    def signed_hyperbolics(self) -> list[tuple[int, int]]:
        """Signed hyperbolic generators in letter order: h1, h1^-1, h2, ..."""
        return [(j, s) for j in range(self.n) for s in (1, -1)]

    def conjugated(self, k: DiscIsometry) -> "GroupPresentation":
        return GroupPresentation(
            tuple(conjugate(g, k) for g in self.parabolics),
            tuple(conjugate(h, k) for h in self.hyperbolics),
        )


@dataclass
class ValidationReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    gaps: dict[tuple[str, str], float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append((name, bool(passed), detail))

    def lines(self) -> list[str]:
        out = [f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "") for name, ok, detail in self.checks]
        out.append("RESULT " + ("pass" if self.ok else "fail"))
        return out


def _label(g: DiscIsometry, default: str) -> str:
    return g.name or default


def validate(p: GroupPresentation) -> ValidationReport:
    """Classify every generator and check pairwise separation of arc pairs."""
    report = ValidationReport()
    pairs: list[tuple[str, list[BoundaryArc]]] = []
    groups = [(p.parabolics, Kind.PARABOLIC, "g"), (p.hyperbolics, Kind.HYPERBOLIC, "h")]
    for gens, expected, prefix in groups:
        for k, g in enumerate(gens):
            label = _label(g, f"{prefix}{k + 1}")
            try:
                kind = classify(g)
            except GeometryError as exc:
                report.add(f"classify {label}", False, str(exc))
                continue
            report.add(f"classify {label}", kind is expected,
                       kind.value if kind is expected else f"not {expected.value} ({kind.value})")
            if kind is expected:
                pairs.append((label, [isometric_arc(g), isometric_arc(inverse(g))]))
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            (li, ai), (lj, aj) = pairs[i], pairs[j]
            gap = min(x.gap(y) for x in ai for y in aj)
            report.gaps[(li, lj)] = gap
            report.add(f"gap {li}|{lj}", gap >= GAP_TOL, f"{gap:.6g} rad")
    if pairs:
        cover = sum(arc.length for _, arcs in pairs for arc in arcs)
        report.add("arcs leave free boundary", cover < 2 * math.pi, f"cover {cover:.6g} rad")
    return report


def _one_cusp_parts(t: float, s: float):
    gamma = DiscIsometry(complex(1.0, t), complex(0.0, -t), "g1")
    h = DiscIsometry(complex(math.cosh(s), 0.0), complex(0.0, math.sinh(s)), "h1")
    return gamma, h


def preset(name: str, t: float = PRESET_T, s: float = PRESET_S) -> GroupPresentation:
    """Built-in presentations ``one_cusp`` and ``two_cusp``."""
    gamma, h = _one_cusp_parts(t, s)
    if name == "one_cusp":
        return GroupPresentation((gamma,), (h,))
    if name == "two_cusp":
        # conjugating by the half turn keeps a and flips b; written exactly
        gamma2 = DiscIsometry(gamma.a, -gamma.b, "g2")
        return GroupPresentation((gamma, gamma2), (h,))
    raise PresentationError(f"unknown preset {name!r}")


def _gen_dict(g: DiscIsometry, default: str) -> dict:
    return {"name": g.name or default, "a": [g.a.real, g.a.imag], "b": [g.b.real, g.b.imag]}


def to_dict(p: GroupPresentation) -> dict:
    return {
        "parabolic": [_gen_dict(g, f"g{k + 1}") for k, g in enumerate(p.parabolics)],
        "hyperbolic": [_gen_dict(h, f"h{k + 1}") for k, h in enumerate(p.hyperbolics)],
    }


def serialize(p: GroupPresentation) -> str:
    return json.dumps(to_dict(p), indent=2)


def from_dict(data, check: bool = True) -> GroupPresentation:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise PresentationError(f"schema error at {path}: {exc.message}") from None
    gens = {}
    for key in ("parabolic", "hyperbolic"):
        out = []
        for k, entry in enumerate(data[key]):
            try:
                out.append(DiscIsometry(complex(*entry["a"]), complex(*entry["b"]), entry["name"]))
            except GeometryError as exc:
                raise PresentationError(f"normalization error at {key}/{k}: {exc}") from None
        gens[key] = tuple(out)
    p = GroupPresentation(gens["parabolic"], gens["hyperbolic"])
    if check:
        report = validate(p)
        if not report.ok:
            failed = [name + (f" ({d})" if d else "") for name, ok, d in report.checks if not ok]
            raise PresentationError("validation failed: " + "; ".join(failed))
    return p


def load(config: str, check: bool = True) -> GroupPresentation:
    """Parse a JSON config string into a validated presentation."""
    try:
        data = json.loads(config)
    except json.JSONDecodeError as exc:
        raise PresentationError(f"parse error: {exc}") from None
    return from_dict(data, check=check)


def load_path(path: str, check: bool = True) -> GroupPresentation:
    """Load from a file path or a ``preset:<name>`` reference."""
    if path.startswith("preset:"):
        return preset(path.split(":", 1)[1])
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return load(text, check=check)


def hyperbolic_derivative_bound(p: GroupPresentation) -> float:
    """Constant ``Z`` with ``1/Z <= |h'| <= Z`` on the isometric arcs of hyperbolic letters."""
    return max((abs(h.a) + abs(h.b)) ** 2 for h in p.hyperbolics)
