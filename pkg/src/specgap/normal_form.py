"""Sinc standard normal form for singular metric coefficients.

A coefficient g = g_plus / g_minus with disjoint zero sets of numerator and
denominator is encoded on the tube around its loci by

    (e^w cos kappa)^2 = | sinc(g_minus) * sinc(g_plus) |,

with sin(kappa) vanishing on the loci, cos(kappa) = +1 on loci of
nondifferentiability (denominator roots) and -1 on loci of rank deficiency
(numerator roots), cos(kappa) = sqrt(2)/2 with vanishing blow-up-axis
derivative on the chart boundary, and all remaining dependence carried by
the weight w.  The kappa representative is a monotone cubic (PCHIP) ladder
through locus-pinned knots; it is deterministic, and its quality is judged
downstream by the Laplace-Beltrami residual of (e^w sin kappa)^10.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .gridfield import Chart

DAMPING_EXPONENT = 10          # config knob; see module docstring
COS2_FLOOR = 1e-6
AMP_FLOOR = 1e-30


class OutOfDomainError(ValueError):
    pass


class LocusResolutionError(RuntimeError):
    pass


def sinc(x):
    """sin(x)/x with sinc(0) = 1; Taylor fallback below |x| = 1e-4."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + xs ** 4 / 120.0
    xb = x[~small]
    out[~small] = np.sin(xb) / xb
    return out if out.shape else float(out)


@dataclass
class MetricCoefficient:
    """Numerator/denominator closures of one metric coefficient."""

    gplus: object
    gminus: object
    index_pair: tuple = (0, 0)
    continuous: tuple = (True, True)


@dataclass
class Locus:
    """One hypersurface x_blow = sigma(transverse), sampled on the
    transverse grid; kind 'N' (nondifferentiability), 'O' (rank
    deficiency), or 'NO' for ray-coalesced roots of both factors."""

    sigma: np.ndarray
    kind: str
    tangential: bool = False


@dataclass
class LocusSet:
    nondiff: list
    rank_def: list
    eps: float

    @property
    def all_loci(self) -> list:
        return list(self.nondiff) + list(self.rank_def)


@dataclass
class NormalForm:
    w: np.ndarray
    kappa: np.ndarray
    s_index: int
    loci: LocusSet
    blowup_axis: int = 0

    def manifest(self) -> str:
        lines = ["blowup_axis %d" % self.blowup_axis,
                 "s_index %d" % self.s_index,
                 "eps %.17g" % self.loci.eps,
                 "n_nondiff %d" % len(self.loci.nondiff),
                 "n_rankdef %d" % len(self.loci.rank_def)]
        for tag, group in (("N", self.loci.nondiff), ("O", self.loci.rank_def)):
            for loc in group:
                vals = np.asarray(loc.sigma).ravel()
                lines.append("locus %s %s" % (tag, " ".join("%.17g" % v
                                                            for v in vals[:64])))
        return "\n".join(lines) + "\n"


def standard_amplitude(c: MetricCoefficient, *point, loci: LocusSet | None = None,
                       blow_value: float | None = None):
    """|sinc(g_minus) sinc(g_plus)| at a point inside the locus tube."""
    gm = np.asarray(c.gminus(*point), dtype=float)
    gp = np.asarray(c.gplus(*point), dtype=float)
    if np.any((np.abs(gm) < 1e-12) & (np.abs(gp) < 1e-12)):
        raise ValueError("numerator and denominator zero sets intersect "
                         "(disjointness requirement violated)")
    if loci is not None and blow_value is not None:
        ok = False
        for loc in loci.all_loci:
            if np.min(np.abs(blow_value - np.asarray(loc.sigma))) <= loci.eps:
                ok = True
                break
        if not ok:
            raise OutOfDomainError("point outside the locus tube")
    return np.abs(sinc(gm) * sinc(gp))


def _ray_roots(fvals: np.ndarray, xs: np.ndarray, f_scalar, refine_tol=1e-10):
    """Roots of a sampled 1-D function: sign changes (bisection-refined) and
    tangential touches (local minima of |f| indistinguishable from zero)."""
    roots = []
    s = np.sign(fvals)
    scale = np.max(np.abs(fvals)) or 1.0
    for i in range(len(xs) - 1):
        if s[i] != 0 and s[i + 1] != 0 and s[i] != s[i + 1]:
            r = brentq(f_scalar, xs[i], xs[i + 1], xtol=refine_tol, rtol=1e-15)
            roots.append((r, False))
        elif s[i] == 0:
            if not roots or abs(xs[i] - roots[-1][0]) > 2 * (xs[1] - xs[0]):
                left = s[i - 1] if i > 0 else 0
                right = s[i + 1] if i + 1 < len(xs) else 0
                tangential = bool(left == right and left != 0)
                roots.append((xs[i], tangential))
    av = np.abs(fvals)
    for i in range(1, len(xs) - 1):
        if (av[i] <= av[i - 1] and av[i] <= av[i + 1]
                and av[i] < 1e-9 * scale and s[i] != 0):
            if all(abs(xs[i] - r) > 2 * (xs[1] - xs[0]) for r, _ in roots):
                roots.append((xs[i], True))
    return sorted(roots)


def classify_loci(c: MetricCoefficient, chart: Chart, n_samples: int = 2001,
                  blowup_axis: int = 0, eps: float | None = None) -> LocusSet:
    """Roots of g_minus along blow-up rays become N loci, roots of g_plus
    O loci; bisection-refined to 1e-10 in the blow-up coordinate.

    Hypersurfaces are grouped by root order along each transverse ray; a
    varying root count raises a warning (locus not a graph over the slice).
    """
    d = chart.dim
    lo, hi = chart.bounds[blowup_axis]
    xs = np.linspace(lo, hi, n_samples)
    t_axes = [i for i in range(d) if i != blowup_axis]
    t_shape = tuple(chart.res[i] for i in t_axes)
    grids = [chart.axis(i) for i in range(d)]

    per_kind = {"N": None, "O": None}
    counts = {"N": set(), "O": set()}
    raw = {"N": {}, "O": {}}
    for idx in np.ndindex(*t_shape):
        point = [None] * d
        for a, i in zip(t_axes, idx):
            point[a] = grids[a][i]

        def along(f):
            args = [xs if a == blowup_axis else np.full_like(xs, point[a])
                    for a in range(d)]
            return np.asarray(f(*args), dtype=float)

        def scalar(f):
            def g(x):
                args = [x if a == blowup_axis else point[a] for a in range(d)]
                return float(f(*args))
            return g

        raw["O"][idx] = _ray_roots(along(c.gplus), xs, scalar(c.gplus))
        raw["N"][idx] = _ray_roots(along(c.gminus), xs, scalar(c.gminus))
        counts["O"].add(len(raw["O"][idx]))
        counts["N"].add(len(raw["N"][idx]))

    for kind in ("N", "O"):
        if len(counts[kind]) > 1:
            warnings.warn("root count varies across transverse points for "
                          "%s loci: %s" % (kind, sorted(counts[kind])))

    def build(kind):
        n_roots = min(counts[kind]) if counts[kind] else 0
        loci = []
        for j in range(n_roots):
            sig = np.zeros(t_shape)
            tang = False
            for idx in np.ndindex(*t_shape):
                r, t = raw[kind][idx][j]
                sig[idx] = r
                tang = tang or t
            loci.append(Locus(sigma=sig, kind=kind, tangential=tang))
        return loci

    nondiff, rank_def = build("N"), build("O")
    if eps is None:
        gap_to_boundary = []
        for loc in nondiff + rank_def:
            gap_to_boundary.append(np.min(np.asarray(loc.sigma) - lo))
            gap_to_boundary.append(np.min(hi - np.asarray(loc.sigma)))
        eps = 0.25 * min(gap_to_boundary) if gap_to_boundary else 0.25 * (hi - lo)
    return LocusSet(nondiff=nondiff, rank_def=rank_def, eps=float(eps))


def designated_index(c: MetricCoefficient, chart: Chart, blowup_axis: int = 0,
                     n_samples: int = 4001, transverse=None) -> int:
    """Eigenvalue index 2s from root counting of sin(g-)sin(g+) along the
    blow-up traverse through the loci.

    Simple (sign-change) roots count once; tangential touches count twice
    (even vanishing order).  The base configuration of a single simple
    denominator locus and no numerator zeros designates index 0.
    """
    d = chart.dim
    lo, hi = chart.bounds[blowup_axis]
    xs = np.linspace(lo, hi, n_samples)
    if transverse is None:
        transverse = [0.5 * (chart.bounds[a][0] + chart.bounds[a][1])
                      for a in range(d) if a != blowup_axis]
    point = list(transverse)

    def along(f):
        args = []
        it = iter(point)
        for a in range(d):
            args.append(xs if a == blowup_axis else np.full_like(xs, next(it)))
        return np.asarray(f(*args), dtype=float)

    def scalar(f):
        def g(x):
            args = []
            it = iter(point)
            for a in range(d):
                args.append(x if a == blowup_axis else next(it))
            return float(f(*args))
        return g

    roots_m = _ray_roots(np.sin(along(c.gminus)), xs,
                         lambda x: np.sin(scalar(c.gminus)(x)))
    roots_p = _ray_roots(np.sin(along(c.gplus)), xs,
                         lambda x: np.sin(scalar(c.gplus)(x)))
    if len(roots_m) == 1 and not roots_m[0][1] and not roots_p:
        return 0
    s = sum(2 if tang else 1 for _, tang in roots_m + roots_p)
    return 2 * s


# ---------------------------------------------------------------------------
# kappa construction

_QUARTER = np.pi / 4.0


def _boundary_value(t, side):
    """Nearest kappa with cos = +sqrt(2)/2, below (side=-1) or above (+1)."""
    even = round(t / np.pi) % 2 == 0
    if even:
        return t + side * _QUARTER
    return t + side * 3.0 * _QUARTER


def _ladder(entries):
    """Targets and plateau levels for a locus sequence.

    entries: list of (kind, touching).  Crossing loci advance a strictly
    increasing ladder (sin kappa changes sign); touching loci (coalesced or
    tangential roots) dip to the nearest parity value and return, so
    sin kappa keeps its sign.  N-type targets sit at even multiples of pi
    (cos = +1), O-type at odd multiples (cos = -1).
    """
    targets = []
    before = []
    after = []
    level = None
    for kind, touch in entries:
        want_even = kind in ("N", "NO")
        if level is None:
            t = 0.0 if want_even else np.pi
            if touch:
                level = t + _QUARTER if want_even else t - 3.0 * _QUARTER
            else:
                level = _boundary_value(t, -1)
        else:
            if touch:
                # nearest value of the required parity to the current level
                period = 2.0 * np.pi
                base = 0.0 if want_even else np.pi
                t = base + period * np.round((level - base) / period)
            else:
                t = np.pi * np.ceil(level / np.pi + 0.25)
                if (round(t / np.pi) % 2 == 0) != want_even:
                    t += np.pi
        before.append(level)
        if not touch:
            level = t + _QUARTER
        targets.append(t)
        after.append(level)
    return targets, before, after


def _kappa_ray(xs, loci, eps):
    """PCHIP kappa profile along one blow-up ray.

    loci: sorted list of (position, kind, touching).
    """
    if not loci:
        return np.full_like(xs, _QUARTER)
    h = xs[1] - xs[0]
    snapped = [xs[int(np.argmin(np.abs(xs - z)))] for z, _, _ in loci]
    for za, zb in zip(snapped, snapped[1:]):
        if zb - za < 4 * h:
            raise LocusResolutionError("locus spacing below 4 grid cells")
    targets, before, after = _ladder([(k, t) for _, k, t in loci])
    kR = after[-1]
    if abs(np.cos(kR) - np.sqrt(2) / 2) > 1e-12:
        kR = _boundary_value(targets[-1], +1)
    knots = [(xs[0], before[0])]
    if snapped[0] - eps > xs[0] + h:
        knots.append((snapped[0] - eps, before[0]))
    for j, (z, t) in enumerate(zip(snapped, targets)):
        knots.append((z, t))
        lvl = after[j] if j + 1 < len(snapped) else kR
        za = z + eps
        if j + 1 < len(snapped):
            za = min(za, 0.5 * (z + snapped[j + 1]))
            zb = max(snapped[j + 1] - eps, 0.5 * (z + snapped[j + 1]))
            knots.append((za, lvl))
            if zb > za:
                knots.append((zb, lvl))
        else:
            if za < xs[-1] - h:
                knots.append((za, lvl))
    knots.append((xs[-1], kR))
    kx, kv = [], []
    for x, v in knots:
        if kx and x <= kx[-1]:
            continue
        kx.append(x)
        kv.append(v)
    interp = PchipInterpolator(kx, kv)
    out = interp(xs)
    for z, t in zip(snapped, targets):
        out[int(np.argmin(np.abs(xs - z)))] = t
    return out


def construct_kappa(c: MetricCoefficient, loci: LocusSet, chart: Chart,
                    blowup_axis: int = 0,
                    s_index: int | None = None) -> NormalForm:
    """Build the (w, kappa) normal form on the chart grid.

    kappa follows the locus-pinned PCHIP ladder ray by ray; w carries the
    amplitude through e^{2w} = amplitude / cos^2(kappa), which reduces to
    the per-locus split |sinc(other factor)| at the loci themselves and to
    2*amplitude on the constant-kappa plateaus.
    """
    d = chart.dim
    xs = chart.axis(blowup_axis)
    t_axes = [i for i in range(d) if i != blowup_axis]
    t_shape = tuple(chart.res[i] for i in t_axes)
    grids = [chart.axis(i) for i in range(d)]
    kap = np.zeros(chart.shape)
    kap_m = np.moveaxis(kap, blowup_axis, -1)
    for idx in np.ndindex(*t_shape):
        entries = []
        for loc in loci.nondiff:
            entries.append((float(np.asarray(loc.sigma)[idx]), "N",
                            loc.tangential))
        for loc in loci.rank_def:
            entries.append((float(np.asarray(loc.sigma)[idx]), "O",
                            loc.tangential))
        entries.sort()
        merged = []
        for z, kind, tang in entries:
            # merge only genuinely coincident roots (ray coalescence);
            # near-grid neighbors are a resolution error downstream
            if merged and abs(z - merged[-1][0]) < 1e-6 * (1.0 + abs(z)):
                merged[-1] = (merged[-1][0], "NO", True)
            else:
                merged.append((z, kind, tang))
        kap_m[idx] = _kappa_ray(xs, merged, loci.eps)
    mesh = np.meshgrid(*grids, indexing="ij")
    amp = np.abs(sinc(np.asarray(c.gminus(*mesh), dtype=float))
                 * sinc(np.asarray(c.gplus(*mesh), dtype=float)))
    cos2 = np.cos(kap) ** 2
    safe = np.maximum(cos2, COS2_FLOOR)
    w = 0.5 * np.log(np.maximum(amp, AMP_FLOOR) / safe)
    return NormalForm(w=w, kappa=kap, loci=loci, blowup_axis=blowup_axis,
                      s_index=designated_index(c, chart, blowup_axis)
                      if s_index is None else s_index)


# ---------------------------------------------------------------------------
# Laplace-Beltrami diagnostic


def laplace_beltrami_residual(metric_fn, nf: NormalForm, chart: Chart,
                              exponent: int = DAMPING_EXPONENT) -> float:
    """sup |Delta_g (e^w sin kappa)^exponent| off a one-cell exclusion band
    around the loci (and off the chart boundary cell).

    metric_fn(*grids) returns the metric components with shape
    (dim, dim, *res).  The residual is a diagnostic score: the normal form
    is a deterministic representative, not a PDE solution, and the damping
    exponent keeps the residual finite across the blow-up.
    """
    d = chart.dim
    grids = chart.grids()
    g = np.asarray(metric_fn(*grids), dtype=float)
    if g.shape[:2] != (d, d):
        raise ValueError("metric_fn must return (dim, dim, *res)")
    spac = [chart.spacing(i) for i in range(d)]
    with np.errstate(all="ignore"):
        gmat = np.moveaxis(g.reshape(d, d, -1), -1, 0)
        ginv = np.linalg.inv(gmat)
        ginv = np.moveaxis(ginv, 0, -1).reshape(d, d, *chart.shape)
        dg = np.empty((d, d, d) + chart.shape)   # dg[l, i, j] = d_l g_ij
        for i in range(d):
            for j in range(d):
                parts = np.gradient(g[i, j], *spac, edge_order=2)
                for l in range(d):
                    dg[l, i, j] = parts[l]
        # Gamma^m_ij = 1/2 g^{ml} (d_i g_lj + d_j g_li - d_l g_ij);
        # dg is indexed [derivative, row, column]
        Gam = 0.5 * (np.einsum("ml...,ilj...->mij...", ginv, dg)
                     + np.einsum("ml...,jli...->mij...", ginv, dg)
                     - np.einsum("ml...,lij...->mij...", ginv, dg))
        f = (np.exp(nf.w) * np.sin(nf.kappa)) ** exponent
        df = np.gradient(f, *spac, edge_order=2)
        hess = np.empty((d, d) + chart.shape)
        for i in range(d):
            parts = np.gradient(df[i], *spac, edge_order=2)
            for j in range(d):
                hess[i, j] = parts[j]
        lb = np.einsum("ij...,ij...->...", ginv, hess)
        lb -= np.einsum("ij...,mij...,m...->...", ginv, Gam, np.stack(df))
    mask = np.zeros(chart.shape, dtype=bool)
    mask[chart.interior()] = True
    xs = chart.axis(nf.blowup_axis)
    h = chart.spacing(nf.blowup_axis)
    band = np.zeros(chart.res[nf.blowup_axis], dtype=bool)
    for loc in nf.loci.all_loci:
        for z in np.asarray(loc.sigma).ravel():
            band |= np.abs(xs - z) <= 1.5 * h
    shape = [1] * d
    shape[nf.blowup_axis] = -1
    mask &= ~band.reshape(shape)
    vals = lb[mask]
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise RuntimeError("exclusion band covers the whole chart")
    return float(np.max(np.abs(vals)))
