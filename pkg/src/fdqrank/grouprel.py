"""Group presentations and the polynomial relation system they induce.

A presentation with generators g_1..g_m becomes n = 2m self-adjoint variables

    X_j = g_j + g_j^{-1},    X_{m+j} = i (g_j - g_j^{-1}),

so that g_j = (t_j - i t_{m+j}) / 2 and g_j^{-1} = (t_j + i t_{m+j}) / 2.  The
relation system lists, per generator, the two unit relations g g^{-1} = 1 and
g^{-1} g = 1 (scaled by 4), followed by one polynomial R - 1 per relator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ParseError, ResourceError, UsageError
from .ncalg import I, GaussianRational, NCPoly, TensorPoly, differentiate

__all__ = [
    "GroupWord",
    "Presentation",
    "RelationSystem",
    "Jacobian",
    "parse_presentation",
    "load_presentation",
    "build_generators",
    "build_relation_system",
    "build_jacobian",
]


@dataclass(frozen=True)
class GroupWord:
    """Sequence of (generator index, +1/-1) letters, kept as written."""

    letters: tuple = ()

    def __post_init__(self):
        for g, e in self.letters:
            if g < 1 or e not in (1, -1):
                raise UsageError(f"bad letter ({g}, {e})")

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple((g, -e) for g, e in reversed(self.letters)))

    def free_reduce(self) -> "GroupWord":
        out: list = []
        for g, e in self.letters:
            if out and out[-1] == (g, -e):
                out.pop()
            else:
                out.append((g, e))
        return GroupWord(tuple(out))

    def render(self, names) -> str:
        if not self.letters:
            return "1"
        return " ".join(names[g - 1] + ("" if e == 1 else "^-1") for g, e in self.letters)


@dataclass(frozen=True)
class Presentation:
    name: str
    generators: tuple
    relators: tuple = ()
    order: int | None = None  # None means infinite

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def is_finite(self) -> bool:
        return self.order is not None

    @property
    def beta0(self) -> float:
        return 0.0 if self.order is None else 1.0 / self.order


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^([+-]?\d+))?$")


def _statements(text: str):
    """Yield (line, column, statement) with comments stripped and ';' split."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        start = 0
        for piece in line.split(";"):
            stripped = piece.strip()
            if stripped:
                col = start + (len(piece) - len(piece.lstrip())) + 1
                yield lineno, col, stripped
            start += len(piece) + 1


def _tokens_with_columns(statement: str, col0: int):
    for m in re.finditer(r"\S+", statement):
        yield col0 + m.start(), m.group()


def _parse_word(tokens, index, lineno, source) -> GroupWord:
    if not tokens:
        raise ParseError("empty relator", lineno, None, source)
    letters: list = []
    for col, tok in tokens:
        m = _TOKEN.match(tok)
        if not m:
            raise ParseError(f"malformed token {tok!r}", lineno, col, source)
        gen, exp = m.group(1), m.group(2)
        if gen not in index:
            raise ParseError(f"unknown generator {gen!r}", lineno, col, source)
        k = 1 if exp is None else int(exp)
        if k == 0:
            raise ParseError(f"zero exponent in {tok!r}", lineno, col, source)
        sign = 1 if k > 0 else -1
        letters.extend([(index[gen], sign)] * abs(k))
    return GroupWord(tuple(letters))


def parse_presentation(text: str, source: str | None = None) -> Presentation:
    """Parse the line-oriented presentation format.

    Directives: ``group NAME``, ``gens ID ...``, ``rel WORD`` (repeatable),
    ``rels (none)`` or ``rels WORD, WORD``, ``order infinite`` or
    ``order finite K``.  ``#`` starts a comment and ``;`` separates
    statements on one line.  Words are tokens ``gen`` or ``gen^k`` with
    ``k != 0``.
    """
    name = None
    gens: list | None = None
    index: dict = {}
    relators: list = []
    order_seen = False
    order = None
    for lineno, col, stmt in _statements(text):
        toks = list(_tokens_with_columns(stmt, col))
        head = toks[0][1]
        rest = toks[1:]
        if head == "group":
            if not rest:
                raise ParseError("group name missing", lineno, col, source)
            name = " ".join(t for _, t in rest)
        elif head == "gens":
            if gens is not None:
                raise ParseError("duplicate gens directive", lineno, col, source)
            if not rest:
                raise ParseError("gens needs at least one generator", lineno, col, source)
            gens = []
            for c, tok in rest:
                if not _IDENT.match(tok):
                    raise ParseError(f"bad generator name {tok!r}", lineno, c, source)
                if tok in index:
                    raise ParseError(f"duplicate generator {tok!r}", lineno, c, source)
                index[tok] = len(gens) + 1
                gens.append(tok)
        elif head in ("rel", "rels"):
            if gens is None:
                raise ParseError("relator before gens directive", lineno, col, source)
            if head == "rels" and [t for _, t in rest] in (["(none)"], ["none"], []):
                continue
            if head == "rel":
                if not rest:
                    raise ParseError("empty relator", lineno, col, source)
                relators.append(_parse_word(rest, index, lineno, source))
                continue
            group: list = []
            for c, tok in rest:
                offset = 0
                for pi, part in enumerate(tok.split(",")):
                    if pi:
                        relators.append(_parse_word(group, index, lineno, source))
                        group = []
                    if part:
                        group.append((c + offset, part))
                    offset += len(part) + 1
            relators.append(_parse_word(group, index, lineno, source))
        elif head == "order":
            words = [t for _, t in rest]
            if words == ["infinite"]:
                order = None
            elif len(words) == 2 and words[0] == "finite":
                try:
                    order = int(words[1])
                except ValueError:
                    raise ParseError(f"bad order {words[1]!r}", lineno, rest[1][0], source) from None
                if order < 1:
                    raise ParseError("order must be positive", lineno, rest[1][0], source)
            else:
                raise ParseError("expected 'order infinite' or 'order finite K'", lineno, col, source)
            order_seen = True
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, col, source)
    if gens is None:
        raise ParseError("missing gens directive", source=source)
    if not order_seen:
        raise ParseError("missing order annotation", source=source)
    return Presentation(name or "unnamed", tuple(gens), tuple(relators), order)


def load_presentation(path) -> Presentation:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read presentation {path}: {exc}") from exc
    return parse_presentation(text, source=str(path))


def build_generators(p: Presentation) -> dict:
    """Map (j, +1) -> g_j and (j, -1) -> g_j^{-1} as degree-one polynomials."""
    m = p.m
    n = 2 * m
    half = Fraction(1, 2)
    subst = {}
    for j in range(1, m + 1):
        subst[(j, 1)] = NCPoly(n, {(j,): half, (m + j,): GaussianRational(0, -half)})
        subst[(j, -1)] = NCPoly(n, {(j,): half, (m + j,): GaussianRational(0, half)})
    return subst


@dataclass(frozen=True)
class RelationSystem:
    presentation: Presentation
    n: int
    F: tuple
    labels: tuple
    substitution: dict = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.F)

    @property
    def m(self) -> int:
        return self.presentation.m

    def scaled(self, factors) -> "RelationSystem":
        """Copy with row i multiplied by the nonzero scalar factors[i]."""
        factors = [GaussianRational.coerce(c) for c in factors]
        if len(factors) != self.k or not all(factors):
            raise UsageError("need one nonzero factor per relation")
        return RelationSystem(
            self.presentation,
            self.n,
            tuple(f.scale(c) for f, c in zip(self.F, factors)),
            self.labels,
            self.substitution,
        )


def relator_polynomial(word: GroupWord, subst: dict, n: int) -> NCPoly:
    out = NCPoly.one(n)
    for letter in word:
        out = out * subst[letter]
    return out


def build_relation_system(p: Presentation) -> RelationSystem:
    m = p.m
    n = 2 * m
    subst = build_generators(p)
    polys: list = []
    labels: list = []
    for j in range(1, m + 1):
        minus = NCPoly(n, {(j,): 1, (m + j,): -I})  # 2 g_j
        plus = NCPoly(n, {(j,): 1, (m + j,): I})  # 2 g_j^{-1}
        polys.append(minus * plus - 4)
        labels.append(f"unit {p.generators[j - 1]}*{p.generators[j - 1]}^-1")
    for j in range(1, m + 1):
        minus = NCPoly(n, {(j,): 1, (m + j,): -I})
        plus = NCPoly(n, {(j,): 1, (m + j,): I})
        polys.append(plus * minus - 4)
        labels.append(f"unit {p.generators[j - 1]}^-1*{p.generators[j - 1]}")
    for r, word in enumerate(p.relators, start=1):
        try:
            poly = relator_polynomial(word, subst, n)
        except ResourceError as exc:
            raise ResourceError(
                f"relator {r} ({word.render(p.generators)}): {exc}"
            ) from exc
        polys.append(poly - 1)
        labels.append(f"relator {word.render(p.generators)}")
    return RelationSystem(p, n, tuple(polys), tuple(labels), subst)


@dataclass(frozen=True)
class Jacobian:
    k: int
    n: int
    entries: tuple  # k rows of n TensorPoly

    def __getitem__(self, ij) -> TensorPoly:
        i, j = ij
        return self.entries[i][j]

    def nonzero(self):
        for i, row in enumerate(self.entries):
            for j, tp in enumerate(row):
                if not tp.is_zero():
                    yield i, j, tp


def build_jacobian(rs: RelationSystem) -> Jacobian:
    entries = tuple(
        tuple(differentiate(f, j) for j in range(1, rs.n + 1)) for f in rs.F
    )
    return Jacobian(rs.k, rs.n, entries)
