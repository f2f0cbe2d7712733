"""Presentations of the double and folded double, words, and Britton reduction.

Base letters are signed 1-based indices into the base generators, so ``-2``
is the inverse of the second generator.  A word of the folded double is
kept in the alternating form

    m_1 t_{r_1}^{k_1} m_2 ... t_{r_{l-1}}^{k_{l-1}} m_l

with possibly empty base syllables ``m_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .lattice import (
    CuspData,
    ExactMatrix,
    cusp_membership,
    matrix_power,
    preserves_form,
)
from .qforms import DiagonalForm, as_form


class FaithfulnessViolation(RuntimeError):
    """A reduced word that should be nontrivial evaluates to the identity."""

    def __init__(self, word, message: str = ""):
        self.word = word
        super().__init__(message or f"reduced word evaluates to identity: {word}")


class ConfigError(ValueError):
    pass


class WordError(ValueError):
    pass


def free_reduce(letters) -> tuple[int, ...]:
    out: list[int] = []
    for x in letters:
        if x == 0:
            raise WordError("letter 0 is not a generator")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_letters(letters) -> tuple[int, ...]:
    return tuple(-x for x in reversed(letters))


@dataclass(frozen=True)
class BaseSyllable:
    letters: tuple[int, ...] = ()
    copy: int = 0

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(x) for x in self.letters))

    def __bool__(self):
        return bool(self.letters)


@dataclass(frozen=True)
class StableSyllable:
    cusp: int
    power: int

    def __post_init__(self):
        if self.power == 0:
            raise WordError("stable syllable with zero exponent")


def _normalize(items) -> tuple[tuple[tuple[int, ...], ...], tuple[StableSyllable, ...]]:
    """Merge adjacent syllables into alternating (bases, stables)."""
    bases: list[tuple[int, ...]] = [()]
    stables: list[StableSyllable] = []
    for it in items:
        if isinstance(it, BaseSyllable):
            bases[-1] = free_reduce(bases[-1] + it.letters)
            continue
        if not isinstance(it, StableSyllable):
            raise WordError(f"unexpected syllable {it!r}")
        if stables and not bases[-1] and stables[-1].cusp == it.cusp:
            k = stables[-1].power + it.power
            bases.pop()
            stables.pop()
            if k:
                stables.append(StableSyllable(it.cusp, k))
                bases.append(())
            # else the two neighbouring base syllables are now adjacent
            continue
        stables.append(it)
        bases.append(())
    return tuple(bases), tuple(stables)


@dataclass(frozen=True)
class Word:
    """Alternating word of the folded double; ``len(bases) == len(stables) + 1``."""

    bases: tuple[tuple[int, ...], ...] = ((),)
    stables: tuple[StableSyllable, ...] = ()

    def __post_init__(self):
        if len(self.bases) != len(self.stables) + 1:
            raise WordError("bases and stables do not alternate")

    @classmethod
    def of(cls, *items) -> "Word":
        if len(items) == 1 and isinstance(items[0], (list, tuple)):
            items = items[0]
        b, s = _normalize(items)
        return cls(b, s)

    @classmethod
    def base(cls, *letters) -> "Word":
        return cls.of([BaseSyllable(letters)])

    @classmethod
    def stable(cls, cusp: int, power: int = 1) -> "Word":
        return cls.of([StableSyllable(cusp, power)])

    def syllables(self) -> list:
        out = [BaseSyllable(self.bases[0])]
        for s, b in zip(self.stables, self.bases[1:]):
            out += [s, BaseSyllable(b)]
        return out

    @property
    def ell(self) -> int:
        return len(self.bases)

    def is_empty(self) -> bool:
        return not self.stables and not self.bases[0]

    def __mul__(self, other: "Word") -> "Word":
        return Word.of(self.syllables() + other.syllables())

    def inverse(self) -> "Word":
        items = []
        for s in reversed(self.syllables()):
            if isinstance(s, BaseSyllable):
                items.append(BaseSyllable(invert_letters(s.letters)))
            else:
                items.append(StableSyllable(s.cusp, -s.power))
        return Word.of(items)

    def to_json(self) -> list[dict]:
        out = []
        for s in self.syllables():
            if isinstance(s, BaseSyllable):
                if s.letters:
                    out.append({"kind": "base", "letters": list(s.letters)})
            else:
                out.append({"kind": "stable", "cusp": s.cusp, "power": s.power})
        return out

    @classmethod
    def from_json(cls, data) -> "Word":
        return cls.of(_syllables_from_json(data, allow_copy=False))

    def __str__(self) -> str:
        parts = []
        for s in self.syllables():
            if isinstance(s, BaseSyllable):
                if s.letters:
                    parts.append("".join(_letter_str(x) for x in s.letters))
            else:
                parts.append(f"t{s.cusp}^{s.power}")
        return " ".join(parts) if parts else "1"


def _letter_str(x: int) -> str:
    return f"g{x}" if x > 0 else f"G{-x}"


def _syllables_from_json(data, allow_copy: bool):
    items = []
    for d in data:
        kind = d.get("kind")
        if kind == "base":
            copy = int(d.get("copy", 0))
            if copy and not allow_copy:
                raise WordError("copy tags are only valid in words of the double")
            items.append(BaseSyllable(tuple(int(x) for x in d["letters"]), copy))
        elif kind == "stable":
            items.append(StableSyllable(int(d["cusp"]), int(d["power"])))
        else:
            raise WordError(f"unknown syllable kind {kind!r}")
    return items


@dataclass(frozen=True)
class DMWord:
    """Word of the double: base syllables carry a copy tag 0 or 1."""

    syllables: tuple = ()

    def __post_init__(self):
        out = []
        for s in self.syllables:
            if isinstance(s, BaseSyllable):
                if s.copy not in (0, 1):
                    raise WordError("copy tag must be 0 or 1")
                if not s.letters:
                    continue
                if out and isinstance(out[-1], BaseSyllable) and out[-1].copy == s.copy:
                    merged = free_reduce(out[-1].letters + s.letters)
                    out.pop()
                    if merged:
                        out.append(BaseSyllable(merged, s.copy))
                    continue
            elif isinstance(s, StableSyllable):
                if s.cusp < 1:
                    raise WordError("the double has stable letters t_1, ..., t_{n-1} only")
            else:
                raise WordError(f"unexpected syllable {s!r}")
            out.append(s)
        object.__setattr__(self, "syllables", tuple(out))

    def __mul__(self, other: "DMWord") -> "DMWord":
        return DMWord(self.syllables + other.syllables)

    def to_json(self) -> list[dict]:
        out = []
        for s in self.syllables:
            if isinstance(s, BaseSyllable):
                out.append({"kind": "base", "letters": list(s.letters), "copy": s.copy})
            else:
                out.append({"kind": "stable", "cusp": s.cusp, "power": s.power})
        return out

    @classmethod
    def from_json(cls, data) -> "DMWord":
        return cls(tuple(_syllables_from_json(data, allow_copy=True)))


# ------------------------------------------------------------------ config

@dataclass
class GroupConfig:
    form: DiagonalForm
    subform_indices: tuple[int, ...]
    base_generators: tuple[ExactMatrix, ...]
    cusps: tuple[CuspData, ...]
    stable_letters: tuple[ExactMatrix, ...]
    base_names: tuple[str, ...] = ()
    stable_powers: tuple[int, ...] = ()
    name: str = ""
    levels: dict = field(default_factory=dict)
    _inv: dict = field(default_factory=dict, repr=False, compare=False)
    _tpow: dict = field(default_factory=dict, repr=False, compare=False)
    _syl: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.form = as_form(self.form)
        self.subform_indices = tuple(self.subform_indices)
        self.base_generators = tuple(self.base_generators)
        self.cusps = tuple(self.cusps)
        self.stable_letters = tuple(self.stable_letters)
        if not self.base_names:
            self.base_names = tuple(f"g{i + 1}" for i in range(len(self.base_generators)))

    @property
    def dim(self) -> int:
        return self.form.rank

    @property
    def n_cusps(self) -> int:
        return len(self.cusps)

    @property
    def normal_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.dim) if i not in self.subform_indices)

    def validate(self) -> "GroupConfig":
        q = self.form
        if len(self.stable_letters) != len(self.cusps):
            raise ConfigError("one stable letter per cusp is required")
        for name, g in zip(self.base_names, self.base_generators):
            if not preserves_form(g, q):
                raise ConfigError(f"base generator {name} does not preserve q")
            for k in self.normal_indices:
                for i in self.subform_indices:
                    if g.num[k][i] != 0:
                        raise ConfigError(f"base generator {name} does not preserve H_G")
        for i, (cusp, t) in enumerate(zip(self.cusps, self.stable_letters)):
            cusp.validate(q)
            if not preserves_form(t, q):
                raise ConfigError(f"stable letter {i} does not preserve q")
            for c in cusp.generators:
                if t @ c != c @ t:
                    raise ConfigError(f"stable letter {i} does not commute with cusp {i}")
            if cusp.words:
                if len(cusp.words) != len(cusp.generators):
                    raise ConfigError(f"cusp {i}: one word per generator is required")
                for w, c in zip(cusp.words, cusp.generators):
                    if self.letters_matrix(w) != c:
                        raise ConfigError(f"cusp {i}: word {w} does not evaluate to its generator")
        return self

    def letter_matrix(self, x: int) -> ExactMatrix:
        i = abs(x) - 1
        if x == 0 or i >= len(self.base_generators):
            raise WordError(f"letter {x} out of range")
        if x > 0:
            return self.base_generators[i]
        if x not in self._inv:
            self._inv[x] = self.base_generators[i].inverse()
        return self._inv[x]

    def letters_matrix(self, letters) -> ExactMatrix:
        letters = tuple(letters)
        if letters in self._syl:
            return self._syl[letters]
        out = ExactMatrix.identity(self.dim)
        for x in letters:
            out = out @ self.letter_matrix(x)
        if len(letters) <= 4:
            self._syl[letters] = out
        return out

    def stable_matrix(self, cusp: int, power: int) -> ExactMatrix:
        if not 0 <= cusp < len(self.stable_letters):
            raise WordError(f"cusp index {cusp} out of range")
        key = (cusp, power)
        if key not in self._tpow:
            self._tpow[key] = matrix_power(self.stable_letters[cusp], power)
        return self._tpow[key]

    def cusp_words(self, i: int) -> tuple[tuple[int, ...], ...]:
        cusp = self.cusps[i]
        if not cusp.words:
            raise ConfigError(f"cusp {i} has no generator words")
        return cusp.words

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "form": [str(c) for c in self.form.coeffs],
            "subformIndices": list(self.subform_indices),
            "baseGenerators": [
                {"name": n, "matrix": g.to_json()} for n, g in zip(self.base_names, self.base_generators)
            ],
            "cusps": [c.to_json() for c in self.cusps],
            "stableLetters": [t.to_json() for t in self.stable_letters],
            "stablePowers": [str(j) for j in self.stable_powers],
            "horoballLevels": {str(k): f"{Fraction(v).numerator}/{Fraction(v).denominator}" for k, v in self.levels.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "GroupConfig":
        gens, names = [], []
        for i, g in enumerate(d["baseGenerators"]):
            if isinstance(g, dict):
                names.append(g.get("name", f"g{i + 1}"))
                gens.append(ExactMatrix.from_json(g["matrix"]))
            else:
                names.append(f"g{i + 1}")
                gens.append(ExactMatrix.from_json(g))
        return cls(
            form=DiagonalForm(tuple(int(c) for c in d["form"])),
            subform_indices=tuple(int(i) for i in d["subformIndices"]),
            base_generators=tuple(gens),
            cusps=tuple(CuspData.from_json(c) for c in d["cusps"]),
            stable_letters=tuple(ExactMatrix.from_json(t) for t in d["stableLetters"]),
            base_names=tuple(names),
            stable_powers=tuple(int(j) for j in d.get("stablePowers", [])),
            name=d.get("name", ""),
            levels={int(k): Fraction(v) for k, v in d.get("horoballLevels", {}).items()},
        )


# ------------------------------------------------------------ presentations

@dataclass(frozen=True)
class Presentation:
    kind: str  # "FM" or "DM"
    generators: tuple[str, ...]
    relators: tuple
    spanning_tree: str

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "generators": list(self.generators),
            "relators": [r.to_json() for r in self.relators],
            "spanningTree": self.spanning_tree,
        }


def folded_presentation(cfg: GroupConfig) -> Presentation:
    """Base generators, t_0..t_{n-1}, and the commutators [t_i, c]."""
    if len(cfg.stable_letters) != cfg.n_cusps:
        raise ConfigError("one stable letter per cusp is required")
    gens = tuple(cfg.base_names) + tuple(f"t{i}" for i in range(cfg.n_cusps))
    rels = []
    for i in range(cfg.n_cusps):
        for c in cfg.cusp_words(i):
            rels.append(
                Word.of([StableSyllable(i, 1), BaseSyllable(c), StableSyllable(i, -1), BaseSyllable(invert_letters(c))])
            )
    return Presentation("FM", gens, tuple(rels), "none")


def double_presentation(cfg: GroupConfig) -> Presentation:
    """Two copies of the base group joined along the cusps; t_0 is the tree edge."""
    if cfg.n_cusps < 1:
        raise ConfigError("the double needs at least one cusp")
    gens = (
        tuple(cfg.base_names)
        + tuple(n + "'" for n in cfg.base_names)
        + tuple(f"t{i}" for i in range(1, cfg.n_cusps))
    )
    rels = []
    for c in cfg.cusp_words(0):
        rels.append(DMWord((BaseSyllable(c, 0), BaseSyllable(invert_letters(c), 1))))
    for i in range(1, cfg.n_cusps):
        for c in cfg.cusp_words(i):
            rels.append(
                DMWord(
                    (
                        StableSyllable(i, 1),
                        BaseSyllable(c, 0),
                        StableSyllable(i, -1),
                        BaseSyllable(invert_letters(c), 1),
                    )
                )
            )
    return Presentation("DM", gens, tuple(rels), "t0")


def dm_to_fm(w: DMWord) -> Word:
    """m -> m, m' -> t_0^-1 m t_0, t_i -> t_0^-1 t_i."""
    items = []
    for s in w.syllables:
        if isinstance(s, BaseSyllable):
            if s.copy == 0:
                items.append(BaseSyllable(s.letters))
            else:
                items += [StableSyllable(0, -1), BaseSyllable(s.letters), StableSyllable(0, 1)]
        else:
            pair = (
                [StableSyllable(0, -1), StableSyllable(s.cusp, 1)]
                if s.power > 0
                else [StableSyllable(s.cusp, -1), StableSyllable(0, 1)]
            )
            items += pair * abs(s.power)
    return Word.of(items)


# --------------------------------------------------------------- evaluation

def evaluate(w, cfg: GroupConfig) -> ExactMatrix:
    """Exact matrix image of a word of the folded double (or of the double)."""
    if isinstance(w, DMWord):
        w = dm_to_fm(w)
    out = cfg.letters_matrix(w.bases[0])
    for s, b in zip(w.stables, w.bases[1:]):
        out = out @ cfg.stable_matrix(s.cusp, s.power)
        if b:
            out = out @ cfg.letters_matrix(b)
    return out


def syllable_length(w: Word) -> int:
    if w.is_empty():
        return 0
    return 2 * w.ell - 1


def britton_reduce(w: Word, cfg: GroupConfig) -> Word:
    """Remove every pinch t_r^k c t_r^k' with c in the cusp group P_r.

    Scans left to right and restarts after each rewrite
    t^k c t^k' -> t^(k+k') c.
    """
    while True:
        for i in range(1, w.ell - 1):
            left, right = w.stables[i - 1], w.stables[i]
            if left.cusp != right.cusp:
                continue
            c = w.bases[i]
            if cusp_membership(cfg.letters_matrix(c), cfg.cusps[left.cusp]) is None:
                continue
            items = []
            for j in range(i - 1):
                items += [BaseSyllable(w.bases[j]), w.stables[j]]
            items.append(BaseSyllable(w.bases[i - 1]))
            k = left.power + right.power
            if k:
                items.append(StableSyllable(left.cusp, k))
            items.append(BaseSyllable(c))
            items.append(BaseSyllable(w.bases[i + 1]))
            for j in range(i + 1, w.ell - 1):
                items += [w.stables[j], BaseSyllable(w.bases[j + 1])]
            w = Word.of(items)
            break
        else:
            return w


@dataclass(frozen=True)
class IdentityVerdict:
    identity: bool
    reason: str
    reduced: Word

    def __bool__(self):
        return self.identity


def is_identity(w: Word, cfg: GroupConfig) -> IdentityVerdict:
    """Britton's criterion, cross-checked against the exact matrix image."""
    r = britton_reduce(w, cfg)
    image_is_id = evaluate(w, cfg).is_identity()
    if r.ell >= 2:
        if image_is_id:
            raise FaithfulnessViolation(w)
        return IdentityVerdict(False, f"reduced word has l={r.ell} >= 2", r)
    base_is_id = cfg.letters_matrix(r.bases[0]).is_identity()
    if base_is_id != image_is_id:
        raise FaithfulnessViolation(w, f"base evaluation disagrees with full image for {w}")
    if base_is_id:
        return IdentityVerdict(True, "l=1, m1=1", r)
    return IdentityVerdict(False, "l=1, m1!=1", r)


# -------------------------------------------------------------- enumeration

def _letter_order(n_gens: int) -> list[int]:
    out = []
    for i in range(1, n_gens + 1):
        out += [i, -i]
    return out


def base_syllables(n_gens: int, B: int) -> list[tuple[int, ...]]:
    """Freely reduced letter sequences of length <= B, by length then lex."""
    letters = _letter_order(n_gens)
    out = [()]
    layer = [()]
    for _ in range(B):
        nxt = []
        for w in layer:
            for x in letters:
                if w and w[-1] == -x:
                    continue
                nxt.append(w + (x,))
        out += nxt
        layer = nxt
    return out


def stable_choices(n_cusps: int, E: int) -> list[StableSyllable]:
    out = []
    for r in range(n_cusps):
        for k in range(1, E + 1):
            out += [StableSyllable(r, k), StableSyllable(r, -k)]
    return out


def interior_allowed(cfg: GroupConfig, syllables) -> list[list[bool]]:
    """allowed[r][j]: syllable j may sit between two t_r syllables (it is not in P_r)."""
    return [
        [cusp_membership(cfg.letters_matrix(s), cfg.cusps[r]) is None for s in syllables]
        for r in range(cfg.n_cusps)
    ]


def enumerate_reduced_words(cfg: GroupConfig, L: int, E: int, B: int):
    """All Britton-reduced words up to syllable length L, graded then lexicographic."""
    if L < 0 or (L and L % 2 == 0):
        raise ValueError("L must be 0 or odd")
    syl = base_syllables(len(cfg.base_generators), B)
    stab = stable_choices(cfg.n_cusps, E)
    allowed = interior_allowed(cfg, syl)
    yield Word()
    if L == 0:
        return
    for s in syl[1:]:
        yield Word((s,), ())
    for ell in range(2, (L + 1) // 2 + 1):
        yield from _words_of_ell(syl, stab, allowed, ell)


def _words_of_ell(syl, stab, allowed, ell):
    def rec(bases, stables):
        pos = len(bases)
        if pos == ell - 1:
            for last in syl:
                yield Word(tuple(bases) + (last,), tuple(stables))
            return
        # choose m_pos (interior), then t_pos
        prev = stables[-1]
        for j, s in enumerate(syl):
            for t in stab:
                if t.cusp == prev.cusp and not allowed[prev.cusp][j]:
                    continue
                yield from rec(bases + [s], stables + [t])

    for m1 in syl:
        for t in stab:
            yield from rec([m1], [t])


def count_reduced_words(cfg: GroupConfig, L: int, E: int, B: int) -> int:
    """Size of the enumeration, computed without listing the words."""
    syl = base_syllables(len(cfg.base_generators), B)
    allowed = interior_allowed(cfg, syl)
    nS, nC = len(syl), cfg.n_cusps
    total = 1 + (nS - 1 if L >= 1 else 0)
    per_cusp = 2 * E
    for ell in range(2, (L + 1) // 2 + 1):
        # vector over the cusp of the latest stable letter
        vec = [nS * per_cusp] * nC
        for _ in range(ell - 2):
            new = [0] * nC
            for r_prev in range(nC):
                for r in range(nC):
                    n_ok = sum(allowed[r_prev]) if r == r_prev else nS
                    new[r] += vec[r_prev] * n_ok * per_cusp
            vec = new
        total += sum(vec) * nS
    return total


def random_word(cfg: GroupConfig, rng, max_ell: int = 4, E: int = 3, B: int = 3) -> Word:
    """Random (not necessarily reduced) word for property tests."""
    ng = len(cfg.base_generators)
    items = []
    ell = int(rng.integers(1, max_ell + 1))
    for i in range(ell):
        n = int(rng.integers(0, B + 1))
        letters = [int(rng.integers(1, ng + 1)) * (1 if rng.random() < 0.5 else -1) for _ in range(n)]
        items.append(BaseSyllable(free_reduce(letters)))
        if i < ell - 1:
            k = int(rng.integers(1, E + 1)) * (1 if rng.random() < 0.5 else -1)
            items.append(StableSyllable(int(rng.integers(0, cfg.n_cusps)), k))
    return Word.of(items)


def word_items(bases, stables) -> list:
    items = [BaseSyllable(bases[0])]
    for s, b in zip(stables, bases[1:]):
        items += [s, BaseSyllable(b)]
    return items

