"""Shipped toy configurations.

T1 lives in q = <-1,1,1,1> (+) <1>.  The base group is generated by two
Eichler parabolics of the subform, one at each of the isotropic points
(1,1,0,0) and (1,-1,0,0); a third cusp at (1,0,1,0) brings a third base
generator.  Stable letters are Eichler parabolics of q in the normal
direction, raised to the least power that moves the horosphere slice a
distance D.
"""

from __future__ import annotations

from fractions import Fraction

from .grouppres import GroupConfig
from .hypgeom import DEFAULT_PREC, Horoball, choose_power, horoball_levels
from .lattice import CuspData, corner_embed, eichler_transvection
from .qforms import DiagonalForm

T1_SUBFORM = DiagonalForm((-1, 1, 1, 1))
T1_FORM = T1_SUBFORM.direct_sum(DiagonalForm((1,)))
T1_POINTS = ((1, 1, 0, 0), (1, -1, 0, 0), (1, 0, 1, 0))
T1_DIRECTIONS = ((0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 0, 1))
T1_NAMES = ("a", "b", "c")


def _e(n: int, i: int) -> tuple[int, ...]:
    return tuple(int(j == i) for j in range(n))


def toy_t1(cusps: int = 2, D: float = 6.0, prec: int = DEFAULT_PREC) -> GroupConfig:
    if cusps not in (1, 2, 3):
        raise ValueError("T1 ships with 1, 2 or 3 cusps")
    n_gens = max(2, cusps)
    f, q = T1_SUBFORM, T1_FORM
    gens = tuple(
        corner_embed(eichler_transvection(f, T1_POINTS[i], T1_DIRECTIONS[i])) for i in range(n_gens)
    )
    points = [T1_POINTS[i] + (0,) for i in range(cusps)]
    cusp_data = tuple(CuspData(i, points[i], (gens[i],), ((i + 1,),)) for i in range(cusps))
    normal = _e(q.rank, 4)
    choice = horoball_levels(points, q, D, prec)
    stables, powers = [], []
    for u in points:
        p = eichler_transvection(q, u, normal)
        j = choose_power(p, Horoball(u, choice.level), q, (0, 1, 2, 3), D, prec).j
        stables.append(eichler_transvection(q, u, tuple(j * x for x in normal)))
        powers.append(j)
    cfg = GroupConfig(
        form=q,
        subform_indices=(0, 1, 2, 3),
        base_generators=gens,
        cusps=cusp_data,
        stable_letters=tuple(stables),
        base_names=T1_NAMES[:n_gens],
        stable_powers=tuple(powers),
        name=f"T1-{cusps}cusp",
        levels={i: choice.level for i in range(cusps)},
    )
    return cfg.validate()


TOYS = {"T1": toy_t1}


def toy_config(name: str = "T1", **kw) -> GroupConfig:
    try:
        return TOYS[name](**kw)
    except KeyError:
        raise ValueError(f"unknown toy config {name!r}") from None


def level_map(cfg: GroupConfig, D: float = 6.0, prec: int = DEFAULT_PREC) -> dict:
    """Horoball level per cusp (uniform), recomputed from the cusp points."""
    if cfg.levels:
        return dict(cfg.levels)
    choice = horoball_levels([c.point for c in cfg.cusps], cfg.form, D, prec)
    return {i: Fraction(choice.level) for i in range(cfg.n_cusps)}
