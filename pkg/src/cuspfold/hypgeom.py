"""Hyperboloid-model geometry for a diagonal form of signature (n,1).

Points satisfy b(x, x) = -1 with a positive entry in the negative-coefficient
coordinate, where b(x, y) = sum a_i x_i y_i.  A horoball with isotropic
center u and level s is {x : |b(x, u)| <= s}; smaller s means deeper.

All numerics run in an mpmath context of explicit precision; exact data
(matrices, centers) are converted on entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath

from .lattice import ExactMatrix, matrix_power, primitive_integer
from .qforms import DiagonalForm, as_form

DEFAULT_PREC = 256
MARGIN_EPS = 1e-9


class GeometryError(ValueError):
    pass


class NoIntersectionError(GeometryError):
    pass


class DegenerateParabolicError(GeometryError):
    pass


@lru_cache(maxsize=None)
def context(prec: int = DEFAULT_PREC) -> mpmath.ctx_mp.MPContext:
    ctx = mpmath.MPContext()
    ctx.prec = prec
    return ctx


def geom_tol(prec: int) -> float:
    """Tolerance for identities that hold exactly up to rounding."""
    return float(mpmath.mpf(2) ** (-(prec // 2)))


def _num(ctx, x):
    if isinstance(x, Fraction):
        return ctx.mpf(x.numerator) / x.denominator
    return ctx.mpf(x)


def vec(ctx, v) -> tuple:
    return tuple(_num(ctx, x) for x in v)


def bil(q: DiagonalForm, x, y, ctx):
    return ctx.fsum(ctx.mpf(a) * xi * yi for a, xi, yi in zip(q.coeffs, x, y))


def _lin(ctx, *terms):
    """sum of c * v over (c, v) pairs."""
    n = len(terms[0][1])
    return tuple(ctx.fsum(c * v[i] for c, v in terms) for i in range(n))


def apply_matrix(g: ExactMatrix, x, ctx) -> tuple:
    den = ctx.mpf(g.den)
    return tuple(ctx.fsum(ctx.mpf(a) * xi for a, xi in zip(row, x)) / den for row in g.num)


@dataclass(frozen=True)
class HPoint:
    coords: tuple
    prec: int = DEFAULT_PREC

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def normalize_point(x, q, prec: int = DEFAULT_PREC) -> HPoint:
    """Scale a timelike vector onto the upper sheet b(x, x) = -1."""
    q = as_form(q)
    ctx = context(prec)
    v = vec(ctx, x)
    val = bil(q, v, v, ctx)
    if val >= 0:
        raise GeometryError("vector is not timelike")
    scale = 1 / ctx.sqrt(-val)
    if v[q.negative_index()] < 0:
        scale = -scale
    return HPoint(tuple(c * scale for c in v), prec)


def basepoint(q, prec: int = DEFAULT_PREC) -> HPoint:
    """The normalized negative-coefficient basis vector."""
    q = as_form(q)
    e = [0] * q.rank
    e[q.negative_index()] = 1
    return normalize_point(e, q, prec)


def distance(x: HPoint, y: HPoint, q) -> "mpmath.mpf":
    q = as_form(q)
    ctx = context(x.prec)
    c = -bil(q, x.coords, y.coords, ctx)
    if c <= 1:
        return ctx.mpf(0)
    return ctx.acosh(c)


def future(u, q) -> tuple:
    """Sign-normalize an isotropic vector so its negative coordinate is positive."""
    q = as_form(q)
    i = q.negative_index()
    if u[i] < 0:
        return tuple(-x for x in u)
    return tuple(u)


# ---------------------------------------------------------------- horoballs

@dataclass(frozen=True)
class Horoball:
    center: tuple
    level: object

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(Fraction(x) if not hasattr(x, "_mpf_") else x for x in self.center))
        if self.level <= 0:
            raise GeometryError("horoball level must be positive")


def _exact_bil(q, u, v):
    return sum(Fraction(a) * Fraction(x) * Fraction(y) for a, x, y in zip(q.coeffs, u, v))


def horoball_distance(A: Horoball, B: Horoball, q, prec: int = DEFAULT_PREC):
    """Signed distance between the bounding horospheres: ln(|b(u_A,u_B)| / (2 s_A s_B))."""
    q = as_form(q)
    ctx = context(prec)
    if all(isinstance(x, Fraction) for x in A.center + B.center):
        b = _exact_bil(q, A.center, B.center)
        if b == 0:
            raise GeometryError("horoballs share a center")
        bb = abs(_num(ctx, b))
    else:
        bb = abs(bil(q, vec(ctx, A.center), vec(ctx, B.center), ctx))
        if bb == 0:
            raise GeometryError("horoballs share a center")
    return ctx.log(bb / (2 * _num(ctx, A.level) * _num(ctx, B.level)))


def horosphere_chart(u, q, prec: int = DEFAULT_PREC):
    """Null partner u' with b(u, u') = -1 and an orthonormal basis of their complement."""
    q = as_form(q)
    ctx = context(prec)
    U = vec(ctx, future(u, q))
    n = q.rank
    i = q.negative_index()
    w = [ctx.mpf(0)] * n
    w[i] = ctx.mpf(1)
    c = bil(q, w, U, ctx)
    ww = bil(q, w, w, ctx)
    up = tuple((wi - ww / (2 * c) * ui) / (-c) for wi, ui in zip(w, U))
    basis = []
    for k in range(n):
        e = [ctx.mpf(int(j == k)) for j in range(n)]
        # remove components along the hyperbolic plane span(U, up)
        cu, cp = bil(q, e, up, ctx), bil(q, e, U, ctx)
        e = [ej + cu * uj + cp * pj for ej, uj, pj in zip(e, U, up)]
        for f in basis:
            cf = bil(q, e, f, ctx)
            e = [ej - cf * fj for ej, fj in zip(e, f)]
        nn = bil(q, e, e, ctx)
        if nn > geom_tol(prec) ** 0.5:
            s = ctx.sqrt(nn)
            basis.append(tuple(ej / s for ej in e))
        if len(basis) == n - 2:
            break
    return U, up, basis


def horosphere_point(chart, s, z, ctx):
    """Point of the horosphere b(x, u) = -s with flat coordinates z."""
    U, up, basis = chart
    s = ctx.mpf(s)
    zz = ctx.fsum(zi * zi for zi in z)
    terms = [(s, up), (1 / (2 * s) + s * zz / 2, U)] + [(s * zi, e) for zi, e in zip(z, basis)]
    return _lin(ctx, *terms)


def horoball_levels(centers, q, D, prec: int = DEFAULT_PREC, floor: Fraction | None | str = "auto",
                    max_rounds: int = 64):
    """Uniform level, halved until every pairwise horoball distance is >= D.

    ``floor`` is a lower bound for |b(u, u')| over all distinct centers of the
    translated family; for integral forms and integral centers it is 1, which
    makes the whole orbit D-separated and not only the listed centers.
    """
    q = as_form(q)
    ctx = context(prec)
    centers = [tuple(Fraction(x) for x in c) for c in centers]
    if floor == "auto":
        integral = all(x.denominator == 1 for c in centers for x in c)
        floor = Fraction(1) if integral else None
    D = ctx.mpf(D)
    s = Fraction(1)
    pairs = {}
    for rounds in range(max_rounds + 1):
        pairs = {}
        ok = True
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                d = horoball_distance(Horoball(centers[i], s), Horoball(centers[j], s), q, prec)
                pairs[(i, j)] = d
                ok &= d >= D
        floor_d = None
        if floor is not None:
            floor_d = ctx.log(_num(ctx, Fraction(floor)) / (2 * _num(ctx, s) ** 2))
            ok &= floor_d >= D
        if ok:
            return LevelChoice(s, rounds, pairs, floor_d, floor)
        s /= 2
    raise GeometryError(f"levels did not separate the horoballs in {max_rounds} rounds")


@dataclass(frozen=True)
class LevelChoice:
    level: Fraction
    rounds: int
    pairwise: dict
    floor_distance: object
    floor: Fraction | None

    def to_json(self) -> dict:
        return {
            "level": f"{self.level.numerator}/{self.level.denominator}",
            "rounds": self.rounds,
            "pairwise": {f"{i}-{j}": mpmath.nstr(d, 20) for (i, j), d in self.pairwise.items()},
            "floor": None if self.floor is None else str(self.floor),
            "floorDistance": None if self.floor_distance is None else mpmath.nstr(self.floor_distance, 20),
        }


# -------------------------------------------------------- rays and segments

@dataclass(frozen=True)
class Ray:
    """Unit-speed ray t -> x cosh t + w sinh t, t >= 0."""

    origin: HPoint
    direction: tuple
    ideal: tuple | None = None

    def point(self, t) -> HPoint:
        ctx = context(self.origin.prec)
        t = ctx.mpf(t)
        ch, sh = ctx.cosh(t), ctx.sinh(t)
        return HPoint(tuple(ch * x + sh * w for x, w in zip(self.origin, self.direction)), self.origin.prec)

    def backward_ideal(self) -> tuple:
        return tuple(x - w for x, w in zip(self.origin, self.direction))

    def forward_ideal(self) -> tuple:
        return tuple(x + w for x, w in zip(self.origin, self.direction))


def ray_to_ideal(x: HPoint, u, q) -> Ray:
    """Ray from x asymptotic to the ideal point of the isotropic vector u."""
    q = as_form(q)
    ctx = context(x.prec)
    U = vec(ctx, future(u, q))
    if all(c == 0 for c in U):
        raise GeometryError("degenerate ideal point")
    if abs(bil(q, U, U, ctx)) > geom_tol(x.prec) * max(abs(c) for c in U) ** 2:
        raise GeometryError("ideal point is not isotropic")
    c = -bil(q, x.coords, U, ctx)
    w = tuple(ui / c - xi for ui, xi in zip(U, x.coords))
    return Ray(x, w, U)


def ray_through(x: HPoint, y: HPoint, q) -> Ray:
    """Ray from x through y."""
    q = as_form(q)
    ctx = context(x.prec)
    c = bil(q, x.coords, y.coords, ctx)
    v = tuple(yi + c * xi for xi, yi in zip(x.coords, y.coords))
    nv = ctx.sqrt(bil(q, v, v, ctx))
    if nv == 0:
        raise GeometryError("coincident points")
    return Ray(x, tuple(vi / nv for vi in v))


@dataclass(frozen=True)
class Ideal:
    coords: tuple


@dataclass(frozen=True)
class Segment:
    """Geodesic piece between two ends, each an HPoint or an Ideal point."""

    start: object
    end: object
    kind: str = "segment"
    carrier: int | None = None
    horoball: int | None = None
    through: HPoint | None = None
    length: object = None
    report_end: HPoint | None = None

    @property
    def is_ray(self) -> bool:
        return isinstance(self.start, Ideal) or isinstance(self.end, Ideal)


def segment_between(x: HPoint, y: HPoint, q, kind: str = "segment", **kw) -> Segment:
    return Segment(x, y, kind, length=distance(x, y, q), **kw)


def truncate_at_horosphere(ray: Ray, H: Horoball, q) -> HPoint:
    """First point t >= 0 of the ray on the horosphere |b(x, u)| = s.

    With A = b(x,u), W = b(w,u) the ray gives b(gamma(t), u) = alpha e^t + beta e^-t,
    alpha = (A + W)/2, beta = (A - W)/2; solve alpha z^2 + s z + beta = 0 for z = e^t.
    """
    q = as_form(q)
    ctx = context(ray.origin.prec)
    U = vec(ctx, future(H.center, q))
    s = _num(ctx, H.level)
    A = bil(q, ray.origin.coords, U, ctx)
    W = bil(q, ray.direction, U, ctx)
    alpha, beta = (A + W) / 2, (A - W) / 2
    tol = geom_tol(ray.origin.prec)
    if abs(A + s) <= tol * s:
        return ray.origin
    roots = []
    if abs(alpha) <= tol * (abs(A) + abs(W)):
        roots = [-beta / s]
    else:
        disc = s * s - 4 * alpha * beta
        if disc < 0:
            raise NoIntersectionError("ray misses the horoball")
        r = ctx.sqrt(disc)
        roots = [(-s - r) / (2 * alpha), (-s + r) / (2 * alpha)]
    ts = sorted(ctx.log(z) for z in roots if z > 0 and ctx.log(z) >= -tol)
    if not ts:
        raise NoIntersectionError("ray misses the horoball")
    return ray.point(max(ts[0], ctx.mpf(0)))


# ------------------------------------------------------------------ angles

def tangent_toward(p, other, q, ctx) -> tuple:
    """Unit tangent at p pointing to a point or an ideal point."""
    if isinstance(other, Ideal):
        U = other.coords
        c = -bil(q, p, U, ctx)
        if c <= 0:
            U = tuple(-x for x in U)
            c = -c
        return tuple(ui / c - pi for ui, pi in zip(U, p))
    y = other.coords if isinstance(other, HPoint) else other
    c = bil(q, p, y, ctx)
    v = tuple(yi + c * pi for pi, yi in zip(p, y))
    nv = bil(q, v, v, ctx)
    if nv <= 0:
        raise GeometryError("tangent toward a coincident point")
    s = ctx.sqrt(nv)
    return tuple(vi / s for vi in v)


def _close(x, y, q, tol, ctx) -> bool:
    return abs(bil(q, x, y, ctx) + 1) <= tol


def _other_end(seg: Segment, p, q, ctx, tol):
    for a, b in ((seg.start, seg.end), (seg.end, seg.start)):
        if isinstance(a, HPoint) and _close(a.coords, p, q, tol, ctx):
            return b
    raise GeometryError("segment does not end at the joint")


def angle_between_tangents(t1, t2, q, ctx):
    c = bil(q, t1, t2, ctx)
    n = ctx.sqrt(bil(q, t1, t1, ctx) * bil(q, t2, t2, ctx))
    c = c / n
    if c > 1:
        c = ctx.mpf(1)
    if c < -1:
        c = ctx.mpf(-1)
    return ctx.acos(c)


def angle_at(p: HPoint, seg1: Segment, seg2: Segment, q):
    """Interior angle at the joint p: pi for a straight continuation, 0 for a fold back."""
    q = as_form(q)
    ctx = context(p.prec)
    tol = geom_tol(p.prec) ** 0.5
    o1 = _other_end(seg1, p.coords, q, ctx, tol)
    o2 = _other_end(seg2, p.coords, q, ctx, tol)
    return angle_between_tangents(tangent_toward(p.coords, o1, q, ctx), tangent_toward(p.coords, o2, q, ctx), q, ctx)


# ------------------------------------------------------------- power choice

@dataclass(frozen=True)
class ChosenPower:
    j: int
    displacement: object
    previous: object


def horosphere_entry(source, u, s, q, ctx, ideal: bool = False) -> tuple:
    """Where the geodesic from ``source`` toward the ideal point u meets b(x,u) = -s."""
    b = -bil(q, source, u, ctx)
    if b <= 0:
        raise GeometryError("source and center are not in general position")
    if ideal:
        return _lin(ctx, (s / b, source), (1 / (2 * s), u))
    return _lin(ctx, (s / b, source), (1 / (2 * s) - s / (2 * b * b), u))


def choose_power(p: ExactMatrix, H: Horoball, q, plane=None, D=6.0, prec: int = DEFAULT_PREC,
                 max_doublings: int = 200) -> ChosenPower:
    """Least j with distance(x, p^j x) >= D for the fixture point x of H inside the plane."""
    q = as_form(q)
    ctx = context(prec)
    u = future(H.center, q)
    if p.apply(u) != tuple(Fraction(x) for x in u):
        raise GeometryError("parabolic does not fix the horoball center")
    x0 = basepoint(q, prec)
    if plane is not None and q.negative_index() not in plane:
        raise GeometryError("plane does not contain the negative coordinate")
    x = horosphere_entry(x0.coords, vec(ctx, u), _num(ctx, H.level), q, ctx)
    D = ctx.mpf(D)

    def disp(m):
        y = apply_matrix(m, x, ctx)
        c = -bil(q, x, y, ctx)
        return ctx.acosh(c) if c > 1 else ctx.mpf(0)

    d1 = disp(p)
    if d1 >= D:
        return ChosenPower(1, d1, ctx.mpf(0))
    if d1 <= geom_tol(prec):
        raise DegenerateParabolicError("parabolic fixes the fixture point")
    lo, hi = 1, 2
    mhi = p @ p
    for _ in range(max_doublings):
        if disp(mhi) >= D:
            break
        lo, hi = hi, 2 * hi
        mhi = mhi @ mhi
    else:
        raise DegenerateParabolicError("displacement does not reach D")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if disp(matrix_power(p, mid)) >= D:
            hi = mid
        else:
            lo = mid
    return ChosenPower(hi, disp(matrix_power(p, hi)), disp(matrix_power(p, hi - 1)) if hi > 1 else ctx.mpf(0))


# ------------------------------------------------------- broken geodesics

@dataclass
class BrokenGeodesic:
    form: DiagonalForm
    segments: list
    joints: list  # (point, index of first segment)
    ell: int
    centers: list  # exact horoball centers y_1..y_{l-1}
    levels: list
    carriers: list  # normals (exact) of the copies C_0..C_{l-1}
    designated: int  # index of the segment that carries condition 3
    prec: int = DEFAULT_PREC
    info: dict = field(default_factory=dict)


def _proportional(u, v) -> bool:
    return primitive_integer(u) == primitive_integer(v) or primitive_integer(u) == tuple(
        -x for x in primitive_integer(v)
    )


def _geodesic_point(w, u, q, ctx):
    """A point on the geodesic between the ideal points w and u."""
    b = -bil(q, w, u, ctx)
    a = 1 / ctx.sqrt(2 * b)
    return HPoint(_lin(ctx, (a, w), (a, u)), ctx.prec)


def build_broken_geodesic(w, cfg, levels, x: HPoint | None = None, D=6.0, prec: int = DEFAULT_PREC,
                          clip: float | None = None) -> BrokenGeodesic:
    """Broken geodesic through x and rho(w) x for a reduced word with l >= 2.

    ``levels`` maps cusp index to horoball level.  Segment order:
    in-ray, then for each horoball a chord followed by a bridge to the next
    horoball, and finally the out-ray.
    """
    from .grouppres import britton_reduce

    q = cfg.form
    ctx = context(prec)
    if w.ell < 2:
        raise GeometryError("words with l < 2 are checked by the matrix test")
    if britton_reduce(w, cfg) != w:
        raise GeometryError("word is not Britton-reduced")
    if x is None:
        x = basepoint(q, prec)
    ell = w.ell
    n = q.rank
    normals = [tuple(Fraction(int(i == k)) for i in range(n)) for k in cfg.normal_indices]

    # prefixes g_i = m_1 t^k_1 ... m_i and h_i = g_i t^k_i
    g = ExactMatrix.identity(n)
    gs, hs = [], []
    for i in range(ell - 1):
        g = g @ cfg.letters_matrix(w.bases[i])
        gs.append(g)
        s = w.stables[i]
        g = g @ cfg.stable_matrix(s.cusp, s.power)
        hs.append(g)
    omega = g @ cfg.letters_matrix(w.bases[-1])
    centers = []
    for gi, s in zip(gs, w.stables):
        centers.append(tuple(gi.apply(cfg.cusps[s.cusp].point)))
    for a, b in zip(centers, centers[1:]):
        if _proportional(a, b):
            raise GeometryError("consecutive horoball centers coincide")
    lv = [levels[s.cusp] for s in w.stables]
    Ucs = [vec(ctx, future(c, q)) for c in centers]
    carriers = [normals] + [[tuple(h.apply(v)) for v in normals] for h in hs]
    wx = HPoint(apply_matrix(omega, x.coords, ctx), prec)

    D = ctx.mpf(D)
    clip = ctx.mpf(clip) if clip is not None else 2 * D + 10
    segs: list[Segment] = []
    joints = []

    # in-ray: the geodesic through x toward y_1, cut at the horosphere
    r0 = ray_to_ideal(x, centers[0], q)
    e = truncate_at_horosphere(r0, Horoball(centers[0], lv[0]), q)
    back = Ideal(r0.backward_ideal())
    far = ray_to_ideal(e, back.coords, q).point(max(clip, distance(e, x, q)))
    segs.append(Segment(back, e, "ray", carrier=0, through=x, length=ctx.inf, report_end=far))
    for i in range(ell - 1):
        H = Horoball(centers[i], lv[i])
        if i < ell - 2:
            mid = _geodesic_point(Ucs[i + 1], Ucs[i], q, ctx)
            f = truncate_at_horosphere(ray_to_ideal(mid, centers[i], q), H, q)
        else:
            f = truncate_at_horosphere(ray_to_ideal(wx, centers[i], q), H, q)
        joints.append((e, len(segs) - 1))
        segs.append(segment_between(e, f, q, "chord", horoball=i))
        joints.append((f, len(segs) - 1))
        if i < ell - 2:
            H2 = Horoball(centers[i + 1], lv[i + 1])
            mid = _geodesic_point(Ucs[i], Ucs[i + 1], q, ctx)
            e2 = truncate_at_horosphere(ray_to_ideal(mid, centers[i + 1], q), H2, q)
            segs.append(segment_between(f, e2, q, "bridge", carrier=i + 1))
            e = e2
        else:
            out = ray_through(f, wx, q) if distance(f, wx, q) > 0 else None
            if out is None:
                raise GeometryError("rho(w) x lies on the horosphere")
            fwd = Ideal(out.forward_ideal())
            far = out.point(max(clip, distance(f, wx, q)))
            segs.append(Segment(f, fwd, "ray", carrier=ell - 1, through=wx, length=ctx.inf, report_end=far))
    designated = 2 * ell - 4  # 0-based index of the third to last segment
    info = {"omega_x": wx}
    return BrokenGeodesic(q, segs, joints, ell, centers, lv, carriers, designated, prec, info)


@dataclass
class Certificate:
    D: float
    lengths: list
    angles: list
    expected_segments: int
    segment_count: int
    length_margins: list
    angle_margins: list
    orthogonality_defect: object
    containment_residual: object
    failures: list
    passed: bool

    @property
    def min_length_margin(self):
        finite = [m for m in self.length_margins if m is not None and mpmath.isfinite(m)]
        return min(finite) if finite else mpmath.inf

    @property
    def min_angle_margin(self):
        return min(self.angle_margins) if self.angle_margins else mpmath.inf

    def to_json(self) -> dict:
        def s(x):
            if x is None:
                return None
            return "inf" if not mpmath.isfinite(x) else mpmath.nstr(x, 25)

        return {
            "D": str(self.D),
            "pass": self.passed,
            "segmentCount": self.segment_count,
            "expectedSegments": self.expected_segments,
            "lengths": [s(x) for x in self.lengths],
            "angles": [s(x) for x in self.angles],
            "lengthMargins": [s(x) for x in self.length_margins],
            "angleMargins": [s(x) for x in self.angle_margins],
            "minLengthMargin": s(self.min_length_margin),
            "minAngleMargin": s(self.min_angle_margin),
            "orthogonalityDefect": s(self.orthogonality_defect),
            "containmentResidual": s(self.containment_residual),
            "failures": list(self.failures),
        }


def _contained(seg: Segment, normals, q, ctx):
    """max |b(point, normal)| over the finite ends and through-point of seg."""
    pts = [p for p in (seg.start, seg.end, seg.through) if isinstance(p, HPoint)]
    worst = ctx.mpf(0)
    for p in pts:
        for nv in normals:
            worst = max(worst, abs(bil(q, p.coords, vec(ctx, nv), ctx)))
    return worst


def check_certificate(bg: BrokenGeodesic, D, ell: int | None = None, eps: float = MARGIN_EPS) -> Certificate:
    """Check segment count, lengths >= D, joint angles > pi/2 and the designated orthogonal entry."""
    q = bg.form
    ctx = context(bg.prec)
    ell = bg.ell if ell is None else ell
    Dm = ctx.mpf(D)
    failures = []
    expected = 2 * ell - 1
    if len(bg.segments) != expected:
        failures.append(f"segment count {len(bg.segments)} != {expected}")
    lengths, lmarg = [], []
    for i, seg in enumerate(bg.segments):
        if seg.is_ray:
            lengths.append(ctx.inf)
            lmarg.append(ctx.inf)
            continue
        d = distance(seg.start, seg.end, q)
        lengths.append(d)
        lmarg.append(d - Dm)
        if d - Dm <= eps:
            failures.append(f"segment {i} ({seg.kind}) shorter than D")
    angles, amarg = [], []
    half = ctx.pi / 2
    for k in range(len(bg.segments) - 1):
        s1, s2 = bg.segments[k], bg.segments[k + 1]
        p = s1.end if isinstance(s1.end, HPoint) else s1.start
        a = angle_at(p, s1, s2, q)
        angles.append(a)
        amarg.append(a - half)
        if a - half <= eps:
            failures.append(f"joint {k} angle not greater than pi/2")
    orth = None
    resid = None
    j = bg.designated
    if 0 <= j < len(bg.segments) and bg.centers:
        seg = bg.segments[j]
        normals = bg.carriers[j // 2] if j // 2 < len(bg.carriers) else []
        resid = _contained(seg, normals, q, ctx)
        if resid > geom_tol(bg.prec) ** 0.5:
            failures.append(f"segment {j} leaves its carrier copy")
        # at its end the segment enters horoball l-1; compare with the radial direction
        p = seg.end
        U = vec(ctx, future(bg.centers[-1], q))
        radial = tangent_toward(p.coords, Ideal(U), q, ctx)
        other = seg.start if isinstance(seg.start, Ideal) else seg.start
        back = tangent_toward(p.coords, other, q, ctx)
        # back must point straight away from the center
        orth = abs(angle_between_tangents(back, radial, q, ctx) - ctx.pi)
        if orth > geom_tol(bg.prec) ** 0.25:
            failures.append(f"segment {j} does not meet horoball {len(bg.centers) - 1} orthogonally")
    return Certificate(D, lengths, angles, expected, len(bg.segments), lmarg, amarg, orth, resid,
                       failures, not failures)
