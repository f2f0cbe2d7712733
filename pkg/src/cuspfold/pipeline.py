"""End-to-end orchestration: stable-letter tables, density hypotheses, sweeps, reports."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .grouppres import (
    BaseSyllable,
    FaithfulnessViolation,
    GroupConfig,
    Word,
    base_syllables,
    count_reduced_words,
    evaluate,
    folded_presentation,
    interior_allowed,
    is_identity,
    stable_choices,
)
from .hypgeom import (
    DEFAULT_PREC,
    MARGIN_EPS,
    GeometryError,
    Horoball,
    apply_matrix,
    basepoint,
    bil,
    build_broken_geodesic,
    check_certificate,
    choose_power,
    context,
    future,
    horoball_levels,
    horosphere_entry,
    tangent_toward,
    Ideal,
    vec,
)
from .lattice import (
    CuspData,
    ExactMatrix,
    embed_block,
    eichler_transvection,
    nullspace,
    preserves_form,
    primitive_integer,
)
from .montesinos import MontesinosParams, montesinos_report, select_isotropic_subform
from .qforms import DiagonalForm, as_form, subform_chain

MOD_P = 1073741789  # largest prime below 2**30; 5 * P**2 < 2**63


class StageError(RuntimeError):
    def __init__(self, stage: str, err: Exception):
        self.stage = stage
        self.error = err
        super().__init__(f"[{stage}] {type(err).__name__}: {err}")


# ------------------------------------------------------ stable-letter table

@dataclass(frozen=True)
class ChainAssignment:
    n: int
    N: int
    table: dict
    flags: tuple
    mode: str

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "mode": self.mode,
            "table": {f"t{i}": f"p({k},{i})" for i, (k, _) in self.table.items()},
            "flags": list(self.flags),
        }


def assign_stable_letters(n: int, N: int, chains=None, mode: str = "clamp") -> ChainAssignment:
    """t_i -> p_(i+2, i) for 0 <= i <= n-3, t_i -> p_(2, i) for i >= n-2.

    The chains only reach k = n-2.  In "clamp" mode entries above that use
    k = n-2; in "literal" mode they are kept.  Either way they are flagged.
    ``chains`` maps a cusp i to the available levels k (a set or a dict).
    """
    if mode not in ("clamp", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    if N <= n - 3:
        raise ValueError(f"need N > n - 3, got N={N}, n={n}")
    table, flags = {}, []
    for i in range(N):
        k = i + 2 if i <= n - 3 else 2
        if k > n - 2:
            if mode == "clamp":
                flags.append(f"t{i}: p({k},{i}) clamped to p({n - 2},{i})")
                k = n - 2
            else:
                flags.append(f"t{i}: p({k},{i}) out of range (k <= {n - 2})")
        if chains is not None and k <= n - 2:
            avail = chains[i] if i in chains or isinstance(chains, list) else ()
            if k not in avail:
                raise KeyError(f"missing chain entry p({k},{i})")
        table[i] = (k, i)
    return ChainAssignment(n, N, table, tuple(flags), mode)


# ------------------------------------------------------ density hypotheses

@dataclass(frozen=True)
class DensityReport:
    hyperplane_vectors: tuple
    contains_corner_block: bool
    degenerate: bool
    patterns_explored: int

    def to_json(self) -> dict:
        return {
            "hyperplaneInvariantVectors": [[str(x) for x in v] for v in self.hyperplane_vectors],
            "containsCornerBlock": self.contains_corner_block,
            "degenerate": self.degenerate,
            "patternsExplored": self.patterns_explored,
        }


def _restrict(g: ExactMatrix, sign: int, basis):
    """Basis of {v in span(basis) : g v = sign v}."""
    n = g.dim
    if not basis:
        return []
    rows = g.rows()
    M = [[sum(rows[i][k] * b[k] for k in range(n)) - sign * b[i] for b in basis] for i in range(n)]
    coeffs = nullspace(M)
    return [tuple(sum(c[j] * basis[j][i] for j in range(len(basis))) for i in range(n)) for c in coeffs]


def _positive_directions(basis, q: DiagonalForm):
    """q-orthogonal basis vectors of span(basis) with q > 0."""
    vecs = [list(b) for b in basis]
    out = []
    while vecs:
        vals = [q.value(v) for v in vecs]
        i = next((k for k, x in enumerate(vals) if x != 0), None)
        if i is None:
            # totally isotropic so far: try sums of pairs
            pair = next(
                ((a, b) for a in range(len(vecs)) for b in range(a + 1, len(vecs)) if q.bil(vecs[a], vecs[b]) != 0),
                None,
            )
            if pair is None:
                break
            a, b = pair
            vecs[a] = [x + y for x, y in zip(vecs[a], vecs[b])]
            continue
        v = vecs.pop(i)
        qv = vals[i]
        if qv > 0:
            out.append(tuple(v))
        vecs = [[x - Fraction(q.bil(w, v), qv) * y for x, y in zip(w, v)] for w in vecs]
        vecs = [w for w in vecs if any(x != 0 for x in w)]
    return out


def hyperplane_invariance_check(gens, q, subform_indices=None, max_gens: int = 20) -> DensityReport:
    """q-positive vectors v with g v = +-v for every generator, by sign pattern."""
    q = as_form(q)
    gens = list(gens)
    if len(gens) > max_gens:
        raise ValueError(f"at most {max_gens} generators")
    for g in gens:
        if not preserves_form(g, q):
            raise ValueError("a generator does not preserve q")
    n = q.rank
    idx = tuple(range(n - 1)) if subform_indices is None else tuple(subform_indices)
    outside = [k for k in range(n) if k not in idx]
    corner = any(
        all(g.num[k][i] == 0 and g.num[i][k] == 0 for k in outside for i in idx)
        and all(g.entry(k, k2) == int(k == k2) for k in outside for k2 in outside)
        and not g.is_identity()
        for g in gens
    )
    degenerate = all(g.is_identity() for g in gens)
    full = [tuple(Fraction(int(i == j)) for i in range(n)) for j in range(n)]
    found = []
    explored = 0

    def rec(k, basis):
        nonlocal explored
        explored += 1
        if not basis:
            return
        if k == len(gens):
            for v in _positive_directions(basis, q):
                found.append(primitive_integer(v))
            return
        for sign in (1, -1):
            rec(k + 1, _restrict(gens[k], sign, basis))

    rec(0, full)
    uniq = []
    for v in found:
        if v not in uniq:
            uniq.append(v)
    for v in uniq:
        for g in gens:
            gv = g.apply(v)
            assert gv == tuple(Fraction(x) for x in v) or gv == tuple(Fraction(-x) for x in v)
    return DensityReport(tuple(uniq), corner, degenerate, explored)


# ----------------------------------------------------------------- sweeps

def _mod_stack(mats, P=MOD_P) -> np.ndarray:
    return np.stack([m.mod_array(P) for m in mats]) if mats else np.zeros((0, 1, 1), dtype=np.int64)


def _batch_mul(A: np.ndarray, B: np.ndarray, P=MOD_P) -> np.ndarray:
    return np.matmul(A, B) % P


@dataclass
class _Tables:
    cfg: GroupConfig
    E: int
    B: int
    syl: list
    syl_mats: list
    stab: list
    stab_mats: list
    allowed: list


def _tables(cfg: GroupConfig, E: int, B: int) -> _Tables:
    syl = base_syllables(len(cfg.base_generators), B)
    stab = stable_choices(cfg.n_cusps, E)
    return _Tables(
        cfg,
        E,
        B,
        syl,
        [cfg.letters_matrix(s) for s in syl],
        stab,
        [cfg.stable_matrix(t.cusp, t.power) for t in stab],
        interior_allowed(cfg, syl),
    )


def modp_nontriviality(cfg: GroupConfig, L: int, E: int, B: int, P: int = MOD_P, tables=None) -> dict:
    """Prove rho(w) != I for every reduced word with l >= 2 within the bounds.

    A product that differs from I modulo P differs from I over Q.  Words whose
    residue is I are re-evaluated exactly and reported if they are trivial.
    """
    T = tables or _tables(cfg, E, B)
    nS, nT = len(T.syl), len(T.stab)
    S = _mod_stack(T.syl_mats, P)
    Tm = _mod_stack(T.stab_mats, P)
    n = cfg.dim
    I = np.eye(n, dtype=np.int64)
    ST = _batch_mul(S[:, None], Tm[None, :], P)  # (nS, nT, n, n): m t
    full_tail = _batch_mul(ST[:, :, None], S[None, None, :], P)  # (nS, nT, nS, n, n)
    checked = 0
    hits = []
    violations = []

    def scan(prefix_mat, tail, key_fn):
        nonlocal checked
        R = _batch_mul(prefix_mat[None], tail.reshape(-1, n, n), P) if prefix_mat is not None else tail.reshape(-1, n, n)
        eq = np.all(R == I, axis=(1, 2))
        checked += R.shape[0]
        for flat in np.flatnonzero(eq):
            hits.append(key_fn(int(flat)))

    cusp_of = [t.cusp for t in T.stab]
    ok = [[[cusp_of[t] != r or T.allowed[r][j] for t in range(nT)] for j in range(nS)] for r in range(cfg.n_cusps)]
    masks = [np.array(ok[r]) for r in range(cfg.n_cusps)]
    for ell in range(2, (L + 1) // 2 + 1):
        if ell == 2:
            scan(None, full_tail, lambda f: ((), np.unravel_index(f, (nS, nT, nS))))
            continue

        # prefixes m_1 t_1 ... m_{l-2} t_{l-2}, then a vectorized tail m t m'
        def prefixes(depth, mat, last_r, path):
            if depth == ell - 2:
                js, ts = np.nonzero(masks[last_r])
                sub = full_tail[js, ts]

                def key(f, js=js, ts=ts, path=tuple(path)):
                    kk, m = divmod(f, nS)
                    return (path, (int(js[kk]), int(ts[kk]), m))

                scan(mat, sub, key)
                return
            for j in range(nS):
                for t in range(nT):
                    if depth > 0 and not ok[last_r][j][t]:
                        continue
                    m = ST[j, t] if mat is None else _batch_mul(mat, ST[j, t], P)
                    prefixes(depth + 1, m, cusp_of[t], path + [(j, t)])

        prefixes(0, None, None, [])
    for h in hits:
        w = _word_from_key(T, h)
        if evaluate(w, cfg).is_identity():
            violations.append(w)
    return {"checked": checked, "residueHits": len(hits), "violations": violations, "prime": P}


def _word_from_key(T: _Tables, key) -> Word:
    path, tail = key
    items = []
    for j, t in path:
        items += [BaseSyllable(T.syl[j]), T.stab[t]]
    j, t, m = (int(x) for x in tail)
    items += [BaseSyllable(T.syl[j]), T.stab[t], BaseSyllable(T.syl[m])]
    return Word.of(items)


class WindowCertifier:
    """Certificate data of every window (chord or bridge) a reduced word can use.

    Pulled back by the prefix isometry, chord i of a word depends only on
    where it comes from (x or the previous horoball center) and where it goes
    (rho(w) x or the next center), and bridge i only on (r_i, m_{i+1}, r_{i+1}).
    """

    def __init__(self, cfg: GroupConfig, E: int, B: int, levels: dict, D=6.0, prec: int = DEFAULT_PREC,
                 x=None, tables=None):
        self.cfg = cfg
        self.q = cfg.form
        self.T = tables or _tables(cfg, E, B)
        self.levels = levels
        self.prec = prec
        self.ctx = context(prec)
        self.D = self.ctx.mpf(D)
        self.x = (x or basepoint(cfg.form, prec)).coords
        self.U = [vec(self.ctx, future(c.point, self.q)) for c in cfg.cusps]
        self.Uexact = [tuple(Fraction(v) for v in future(c.point, self.q)) for c in cfg.cusps]
        self.s = {r: self.ctx.mpf(Fraction(levels[r]).numerator) / Fraction(levels[r]).denominator for r in levels}
        self.inv = [m.inverse() for m in self.T.syl_mats]
        self._src = {}
        self._tgt = {}
        self._chord = {}
        self._bridge = {}

    # sources and targets in the frame of horoball r
    def _point_end(self, key):
        ctx = self.ctx
        kind = key[0]
        if kind == "x":  # m^-1 x
            p = apply_matrix(self.inv[key[1]], self.x, ctx)
            return p, False
        if kind == "u":  # m^-1 u_{r_prev}
            _, r_prev, j = key
            return apply_matrix(self.inv[j], self.U[r_prev], ctx), True
        if kind == "X":  # t^k m x
            _, t, j = key
            g = self.T.stab_mats[t] @ self.T.syl_mats[j]
            return apply_matrix(g, self.x, ctx), False
        if kind == "V":  # t^k m u_{r_next}
            _, t, j, r_next = key
            g = self.T.stab_mats[t] @ self.T.syl_mats[j]
            return apply_matrix(g, self.U[r_next], ctx), True
        raise KeyError(key)

    def _end(self, cache, key, r):
        ck = (key, r)
        if ck not in cache:
            ctx, q = self.ctx, self.q
            p, ideal = self._point_end(key)
            u, s = self.U[r], self.s[r]
            if -bil(q, p, u, ctx) <= (0 if ideal else s):
                raise GeometryError(f"window end {key} is not outside horoball {r}")
            e = horosphere_entry(p, u, s, q, ctx, ideal=ideal)
            t = tangent_toward(e, Ideal(p) if ideal else p, q, ctx)
            cache[ck] = (e, t)
        return cache[ck]

    def chord(self, src, r, tgt):
        key = (src, r, tgt)
        if key not in self._chord:
            ctx, q = self.ctx, self.q
            e, te = self._end(self._src, src, r)
            f, tf = self._end(self._tgt, tgt, r)
            c = -bil(q, e, f, ctx)
            d = ctx.acosh(c)
            sh = ctx.sqrt(c * c - 1)
            a_e = ctx.acos(bil(q, te, f, ctx) / sh)
            a_f = ctx.acos(bil(q, tf, e, ctx) / sh)
            self._chord[key] = (d, a_e, a_f)
        return self._chord[key]

    def bridge(self, r, j, r_next):
        key = (r, j, r_next)
        if key not in self._bridge:
            ctx, q = self.ctx, self.q
            mu = self.T.syl_mats[j].apply(self.Uexact[r_next])
            u = self.Uexact[r]
            if primitive_integer(u) in (primitive_integer(mu), tuple(-x for x in primitive_integer(mu))):
                raise GeometryError(f"consecutive horoball centers coincide for {key}")
            b = sum(Fraction(a) * x * y for a, x, y in zip(q.coeffs, u, mu))
            bb = abs(ctx.mpf(b.numerator) / b.denominator)
            self._bridge[key] = ctx.log(bb / (2 * self.s[r] * self.s[r_next]))
        return self._bridge[key]

    def word_data(self, w: Word):
        """(lengths, angles) of the broken geodesic of w assembled from windows."""
        T = self.T
        sidx = {s: i for i, s in enumerate(T.syl)}
        tidx = {s: i for i, s in enumerate(T.stab)}
        js = [sidx[b] for b in w.bases]
        ts = [tidx[s] for s in w.stables]
        rs = [s.cusp for s in w.stables]
        ell = w.ell
        lengths = [self.ctx.inf]
        angles = []
        for i in range(ell - 1):
            src = ("x", js[0]) if i == 0 else ("u", rs[i - 1], js[i])
            tgt = ("X", ts[i], js[-1]) if i == ell - 2 else ("V", ts[i], js[i + 1], rs[i + 1])
            d, a_e, a_f = self.chord(src, rs[i], tgt)
            lengths.append(d)
            angles += [a_e, a_f]
            if i < ell - 2:
                lengths.append(self.bridge(rs[i], js[i + 1], rs[i + 1]))
        lengths.append(self.ctx.inf)
        return lengths, angles

    def run(self, L: int):
        """Certify every window used by a reduced word of syllable length <= L."""
        T = self.T
        nS = len(T.syl)
        nT = len(T.stab)
        nC = self.cfg.n_cusps
        cusp_of = [t.cusp for t in T.stab]
        max_ell = (L + 1) // 2
        if max_ell >= 2:
            for j in range(nS):
                for t in range(nT):
                    for m in range(nS):
                        self.chord(("x", j), cusp_of[t], ("X", t, m))
        if max_ell >= 3:
            # first chord toward the next center, last chord from the previous one
            for r in range(nC):
                for t in range(nT):
                    if cusp_of[t] != r:
                        continue
                    for j2 in range(nS):
                        for r2 in range(nC):
                            if r2 == r and not T.allowed[r][j2]:
                                continue
                            self.bridge(r, j2, r2)
                            for j in range(nS):
                                self.chord(("x", j), r, ("V", t, j2, r2))
                            for t2 in range(nT):
                                if cusp_of[t2] != r2:
                                    continue
                                for m in range(nS):
                                    self.chord(("u", r, j2), r2, ("X", t2, m))
        if max_ell >= 4:
            for r0 in range(nC):
                for j1 in range(nS):
                    for r in range(nC):
                        if r == r0 and not T.allowed[r0][j1]:
                            continue
                        for t in range(nT):
                            if cusp_of[t] != r:
                                continue
                            for j2 in range(nS):
                                for r2 in range(nC):
                                    if r2 == r and not T.allowed[r][j2]:
                                        continue
                                    self.chord(("u", r0, j1), r, ("V", t, j2, r2))
        return self.summary()

    def summary(self) -> dict:
        ctx = self.ctx
        half = ctx.pi / 2
        min_chord = min((v[0] for v in self._chord.values()), default=ctx.inf)
        min_bridge = min(self._bridge.values(), default=ctx.inf)
        min_angle = min((min(v[1], v[2]) for v in self._chord.values()), default=ctx.inf)
        fails = []
        for k, (d, a, b) in self._chord.items():
            if d - self.D <= MARGIN_EPS:
                fails.append(f"chord {k} length {mpmath.nstr(d, 12)}")
            if min(a, b) - half <= MARGIN_EPS:
                fails.append(f"chord {k} angle {mpmath.nstr(min(a, b), 12)}")
        for k, d in self._bridge.items():
            if d - self.D <= MARGIN_EPS:
                fails.append(f"bridge {k} length {mpmath.nstr(d, 12)}")
        return {
            "chordWindows": len(self._chord),
            "bridgeWindows": len(self._bridge),
            "minLengthMargin": min(min_chord, min_bridge) - self.D,
            "minChordMargin": min_chord - self.D,
            "minBridgeMargin": min_bridge - self.D,
            "minAngleMargin": min_angle - half,
            "failures": fails,
        }


def sample_reduced_words(cfg: GroupConfig, L: int, E: int, B: int, count: int, seed: int = 0, tables=None):
    """Deterministic random sample of reduced words with 2 <= l <= (L+1)/2."""
    T = tables or _tables(cfg, E, B)
    rng = np.random.default_rng(seed)
    max_ell = (L + 1) // 2
    out = []
    while len(out) < count and max_ell >= 2:
        ell = int(rng.integers(2, max_ell + 1))
        items = [BaseSyllable(T.syl[int(rng.integers(len(T.syl)))])]
        prev = None
        for i in range(ell - 1):
            t = T.stab[int(rng.integers(len(T.stab)))]
            if i > 0:
                while True:
                    j = int(rng.integers(len(T.syl)))
                    if t.cusp != prev or T.allowed[prev][j]:
                        break
                items.append(BaseSyllable(T.syl[j]))
            items.append(t)
            prev = t.cusp
        items.append(BaseSyllable(T.syl[int(rng.integers(len(T.syl)))]))
        out.append(Word.of(items))
    return out


def _fmt(x, digits: int = 20):
    if x is None:
        return None
    if not mpmath.isfinite(x):
        return "inf"
    return mpmath.nstr(x, digits)


def faithfulness_sweep(cfg: GroupConfig, L: int = 5, E: int = 3, B: int = 3, D=6.0, prec: int = DEFAULT_PREC,
                       levels: dict | None = None, engine: str = "windowed", sample: int = 64, seed: int = 0,
                       timing: bool = False) -> dict:
    """Exact nontriviality and broken-geodesic certificates for all reduced words within bounds.

    engine="literal" builds and checks every word one by one (small bounds
    only).  engine="windowed" certifies shared windows once, proves
    nontriviality with a modular batch, and cross-checks a sample of words
    against the literal construction.
    """
    t0 = time.perf_counter()
    if levels is None:
        levels = cfg.levels or {
            i: horoball_levels([c.point for c in cfg.cusps], cfg.form, D, prec).level for i in range(cfg.n_cusps)
        }
    T = _tables(cfg, E, B)
    total = count_reduced_words(cfg, L, E, B)
    by_ell = {}
    failures = []
    # l <= 1: exact matrices
    trivial_base = [s for s, m in zip(T.syl[1:], T.syl_mats[1:]) if m.is_identity()] if L >= 1 else []
    if trivial_base:
        raise FaithfulnessViolation(Word((trivial_base[0],), ()), "nonempty base word evaluates to the identity")
    report = {
        "config": cfg.name,
        "bounds": {"L": L, "E": E, "B": B},
        "D": str(D),
        "precisionBits": prec,
        "engine": engine,
        "levels": {str(k): f"{Fraction(v).numerator}/{Fraction(v).denominator}" for k, v in sorted(levels.items())},
        "words": str(total),
    }
    if engine == "literal":
        from .grouppres import enumerate_reduced_words

        n_cert = 0
        min_l, min_a = mpmath.inf, mpmath.inf
        for w in enumerate_reduced_words(cfg, L, E, B):
            by_ell[w.ell] = by_ell.get(w.ell, 0) + 1
            if w.is_empty():
                continue
            if is_identity(w, cfg).identity:
                raise FaithfulnessViolation(w, "nonempty reduced word evaluates to the identity")
            if w.ell >= 2:
                try:
                    cert = check_certificate(build_broken_geodesic(w, cfg, levels, D=D, prec=prec), D)
                except GeometryError as exc:
                    failures.append(f"{w}: {exc}")
                    continue
                n_cert += 1
                min_l = min(min_l, cert.min_length_margin)
                min_a = min(min_a, cert.min_angle_margin)
                failures += [f"{w}: {f}" for f in cert.failures]
        report["byEll"] = {str(k): str(v) for k, v in sorted(by_ell.items())}
        report["nontriviality"] = {"method": "exact", "checked": str(total - 1)}
        report["certificates"] = {
            "words": str(n_cert),
            "minLengthMargin": _fmt(min_l),
            "minAngleMargin": _fmt(min_a),
        }
    else:
        modp = modp_nontriviality(cfg, L, E, B, tables=T)
        if modp["violations"]:
            raise FaithfulnessViolation(modp["violations"][0])
        report["nontriviality"] = {
            "method": "modular batch",
            "prime": str(modp["prime"]),
            "checked": str(modp["checked"] + len(T.syl) - 1),
            "residueHits": str(modp["residueHits"]),
        }
        wc = WindowCertifier(cfg, E, B, levels, D, prec, tables=T)
        try:
            summ = wc.run(L)
        except GeometryError as exc:
            failures.append(str(exc))
            summ = wc.summary()
        failures += summ["failures"]
        # literal cross-check on a deterministic sample
        agree = 0
        worst = mpmath.mpf(0)
        samples = sample_reduced_words(cfg, L, E, B, sample, seed, tables=T)
        for w in samples:
            cert = check_certificate(build_broken_geodesic(w, cfg, levels, D=D, prec=prec), D)
            lengths, angles = wc.word_data(w)
            diff = max(
                [abs(a - b) for a, b in zip(cert.lengths, lengths) if mpmath.isfinite(a)]
                + [abs(a - b) for a, b in zip(cert.angles, angles)]
            )
            worst = max(worst, diff)
            if cert.passed and len(cert.lengths) == len(lengths) and diff < 1e-30:
                agree += 1
            else:
                failures.append(f"sample {w}: literal and windowed certificates disagree")
        n_cert = total - len(T.syl)
        report["certificates"] = {
            "words": str(n_cert),
            "chordWindows": str(summ["chordWindows"]),
            "bridgeWindows": str(summ["bridgeWindows"]),
            "minLengthMargin": _fmt(summ["minLengthMargin"]),
            "minAngleMargin": _fmt(summ["minAngleMargin"]),
            "sampleChecked": str(len(samples)),
            "sampleAgreeing": str(agree),
            "sampleMaxDeviation": _fmt(worst, 5),
        }
    report["failures"] = failures
    report["passed"] = not failures
    if timing:
        report["runtimeSeconds"] = round(time.perf_counter() - t0, 3)
    return report


# ------------------------------------------------------------ configuration

def config_from_subform(form, indices, witnesses, name: str = "", D=6.0, prec: int = DEFAULT_PREC) -> GroupConfig:
    """Base group, cusps and stable letters built from isotropic vectors of a subform.

    Each witness u of f gives a cusp at u (embedded into q) with the Eichler
    generator E_f(u, v), where v runs through the short vectors orthogonal to
    u (the i-th cusp takes the i-th one), and a stable letter E_q(u, j e_normal).
    """
    q = as_form(form)
    indices = tuple(indices)
    f = q.subform(indices)
    n = q.rank
    normal = next(k for k in range(n) if k not in indices)
    gens, cusps, stables, powers, points = [], [], [], [], []
    for i, u in enumerate(witnesses):
        u = tuple(int(x) for x in u)
        perp = nullspace([[f.coeffs[k] * u[k] for k in range(f.rank)]])
        perp = [primitive_integer(v) for v in perp]
        perp.sort(key=lambda v: (sum(abs(x) for x in v), v))
        # cycle through the directions so the cusps do not share a fixed hyperplane
        cands = [p for p in perp if f.value(p) != 0]
        v = cands[i % len(cands)]
        g = embed_block(eichler_transvection(f, u, v), indices, n)
        gens.append(g)
        U = [0] * n
        for a, k in enumerate(indices):
            U[k] = u[a]
        points.append(tuple(U))
        cusps.append(CuspData(i, tuple(U), (g,), ((i + 1,),)))
    choice = horoball_levels(points, q, D, prec)
    e = tuple(int(k == normal) for k in range(n))
    for U in points:
        p = eichler_transvection(q, U, e)
        j = choose_power(p, Horoball(U, choice.level), q, indices, D, prec).j
        stables.append(eichler_transvection(q, U, tuple(j * x for x in e)))
        powers.append(j)
    return GroupConfig(
        form=q,
        subform_indices=indices,
        base_generators=tuple(gens),
        cusps=tuple(cusps),
        stable_letters=tuple(stables),
        stable_powers=tuple(powers),
        name=name,
        levels={i: choice.level for i in range(len(points))},
    ).validate()


def _second_witness(f: DiagonalForm, u):
    """Another isotropic vector of f: flip the sign of the first nonzero coordinate."""
    u = list(u)
    k = next(i for i, x in enumerate(u) if x != 0)
    u[k] = -u[k]
    return tuple(u)


def load_config(data) -> tuple[GroupConfig, dict]:
    """Read a config file (path or dict); returns the config and its run options."""
    if isinstance(data, str):
        with open(data) as fh:
            data = json.load(fh)
    cfg = GroupConfig.from_json(data).validate()
    sweep = data.get("sweep", {})
    opts = {
        "D": float(data.get("D", 6.0)),
        "precisionBits": int(data.get("precisionBits", DEFAULT_PREC)),
        "L": int(sweep.get("L", 3)),
        "E": int(sweep.get("E", 1)),
        "B": int(sweep.get("B", 1)),
    }
    return cfg, opts


def config_json(cfg: GroupConfig, D=6.0, prec: int = DEFAULT_PREC, L: int = 3, E: int = 1, B: int = 1) -> dict:
    d = cfg.to_json()
    d.update({"D": str(D), "precisionBits": prec, "sweep": {"L": L, "E": E, "B": B}})
    return d


# ------------------------------------------------------------------ report

def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:  # surfaced with the stage tag
        raise StageError(name, exc) from exc


def run_pipeline(S: int | None = None, a: int | None = None, form=None, toy: str | None = None,
                 D=6.0, L: int = 3, E: int = 1, B: int = 1, prec: int = DEFAULT_PREC,
                 reading: str | None = None, engine: str = "windowed", timing: bool = False,
                 cusps: int = 2) -> dict:
    """Montesinos data or a form or a toy name -> certified folded-double report."""
    report: dict = {"input": {}}
    if toy is not None:
        from .toys import toy_config

        report["input"] = {"toy": toy, "cusps": cusps}
        cfg = _stage("config", toy_config, toy, cusps=cusps, D=D, prec=prec)
    else:
        if S is not None:
            params = MontesinosParams(int(S), int(a)) if reading is None else MontesinosParams(int(S), int(a), reading)
            report["input"] = {"S": str(S), "a": str(a), "reading": params.reading}
            mrep = _stage("montesinos", montesinos_report, params)
            report["montesinos"] = mrep.to_json()
            sel = _stage("subform", select_isotropic_subform, params)
            report["subform"] = sel.to_json()
            q, indices, witness = sel.form, sel.indices, sel.witness
            chain = _stage("chain", subform_chain, q)
        elif form is not None:
            q = as_form(form)
            report["input"] = {"form": [str(c) for c in q.coeffs]}
            chain = _stage("chain", subform_chain, q)
            if not chain.complete:
                raise StageError("chain", ValueError(chain.failure))
            last = chain.steps[-1]
            indices = last.indices
            from .qforms import find_isotropic_vector

            witness = _stage("subform", find_isotropic_vector, last.form, 1000)
            if witness is None:
                raise StageError("subform", ValueError("no isotropic witness within the search bound"))
            report["subform"] = {"f": [str(c) for c in last.form.coeffs], "indices": list(indices),
                                 "witness": [str(x) for x in witness]}
        else:
            raise ValueError("give (S, a), a form, or a toy name")
        report["chain"] = chain.to_json()
        f = q.subform(indices)
        witnesses = [witness, _second_witness(f, witness)][:cusps]
        cfg = _stage("config", config_from_subform, q, indices, witnesses, "montesinos" if S else "form", D, prec)
    report["config"] = cfg.to_json()
    pres = _stage("presentation", folded_presentation, cfg)
    report["presentation"] = pres.to_json()
    n = cfg.dim - 1
    if cfg.n_cusps > n - 3:
        report["stableLetters"] = _stage("assignment", assign_stable_letters, n, cfg.n_cusps).to_json()
    else:
        report["stableLetters"] = {"skipped": f"needs more than {n - 3} cusps"}
    report["powers"] = [str(j) for j in cfg.stable_powers]
    sweep = _stage("sweep", faithfulness_sweep, cfg, L, E, B, D, prec, None, engine, 16, 0, timing)
    report["sweep"] = sweep
    corner = _stage("density", hyperplane_invariance_check, cfg.base_generators, cfg.form, cfg.subform_indices)
    full = _stage(
        "density",
        hyperplane_invariance_check,
        list(cfg.base_generators) + list(cfg.stable_letters[:1]),
        cfg.form,
        cfg.subform_indices,
    )
    report["density"] = {"baseGroup": corner.to_json(), "withStableLetter": full.to_json()}
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
