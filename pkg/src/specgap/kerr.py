"""End-to-end Kerr pipeline in Kerr-Schild Cartesian coordinates.

The metric is g = eta + (2 m r^3/(r^4 + a^2 z^2)) l (x) l with the null
vector l = (1, (rx+ay)/(r^2+a^2), (ry-ax)/(r^2+a^2), z/r) and r(x, y, z)
the nonnegative root of x^2+y^2+z^2 = r^2 + a^2 (1 - z^2/r^2).

z is the blow-up parameter.  The chart axis order is (t, x, z, y) so that
the Darboux pairing of the reference form omega = dt^dz + dx^dy matches the
chart convention (axis i paired with i+2).  Each of the ten independent
coefficients splits as g_plus/g_minus with the factors read off the sinc
displays; the denominator zero set (N locus) is the ring/disk z = 0, the
numerator zero sets (O loci) are the surfaces U1..U5.  The designated
eigenvalue indices are fixed assignment data, regression-guarded against

    (0,0)->12 (0,1)->4 (0,2)->4 (0,3)->2 (1,1)->2
    (1,2)->6 (1,3)->6 (2,2)->2 (2,3)->6 (3,3)->2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curves, fourier_oracle, hill, normal_form
from .gridfield import Chart, write_csv
from .preframe import CourantSection, Preframe

DESIGNATED_INDEX = {
    (0, 0): 12, (0, 1): 4, (0, 2): 4, (0, 3): 2, (1, 1): 2,
    (1, 2): 6, (1, 3): 6, (2, 2): 2, (2, 3): 6, (3, 3): 2,
}

LOCUS_ASSIGNMENT = {
    (0, 0): ("U0", ("U1", "U2")),
    (0, 1): ("U0", ("U3",)),
    (0, 2): ("U0", ("U4",)),
    (0, 3): ("U0", ("U5",)),
    (1, 1): ("U0", ()),
    (1, 2): ("U0", ("U3", "U4")),
    (1, 3): ("U0", ("U3", "U5")),
    (2, 2): ("U0", ()),
    (2, 3): ("U0", ("U4", "U5")),
    (3, 3): ("U0", ()),
}


class SingularPointError(ValueError):
    pass


class IndexTableMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class KerrParams:
    m: float
    a: float
    eps: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.a < self.m):
            raise ValueError("require 0 < a < m")
        if not (0.0 < self.eps < (self.r_plus - self.r_minus) / 4.0):
            raise ValueError("tube width must satisfy 0 < eps < (r+ - r-)/4")

    @property
    def r_plus(self) -> float:
        return self.m + np.sqrt(self.m ** 2 - self.a ** 2)

    @property
    def r_minus(self) -> float:
        return self.m - np.sqrt(self.m ** 2 - self.a ** 2)


def kerr_r(x, y, z, a: float):
    """Nonnegative root of the implicit Kerr-Schild radius relation."""
    x = np.asarray(x, dtype=float)
    rho2 = x * x + np.asarray(y) ** 2 + np.asarray(z) ** 2
    s = rho2 - a * a
    r2 = 0.5 * (s + np.sqrt(s * s + 4.0 * a * a * np.asarray(z) ** 2))
    return np.sqrt(np.maximum(r2, 0.0))


def kerr_r_residual(x, y, z, a: float):
    """Scaled residual of x^2+y^2+z^2 = r^2 + a^2 (1 - z^2/r^2)."""
    r = kerr_r(x, y, z, a)
    rho2 = np.asarray(x) ** 2 + np.asarray(y) ** 2 + np.asarray(z) ** 2
    r2 = r * r
    # polynomial form avoids dividing by r on the disk: r^4 - (rho2-a2) r^2 - a2 z2
    res = r2 * r2 - (rho2 - a * a) * r2 - a * a * np.asarray(z) ** 2
    return np.abs(res) / (1.0 + rho2) ** 2


def kerr_metric(t, x, y, z, p: KerrParams):
    """Metric matrix (4x4, index order t,x,y,z) and the null vector l."""
    r = float(kerr_r(x, y, z, p.a))
    if r < 1e-13:
        raise SingularPointError("metric evaluated on the ring/disk r = 0")
    a = p.a
    denom = r ** 4 + a * a * z * z
    f = 2.0 * p.m * r ** 3 / denom
    ell = np.array([1.0,
                    (r * x + a * y) / (r * r + a * a),
                    (r * y - a * x) / (r * r + a * a),
                    z / r])
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    return eta + f * np.outer(ell, ell), ell


def null_defects(t, x, y, z, p: KerrParams):
    """Scaled null defects (|eta^{mn} l_m l_n|, |g_{mn} l^m l^n|) with the
    index raised by eta; both vanish for the Kerr l."""
    g, ell = kerr_metric(t, x, y, z, p)
    eta_inv = np.diag([-1.0, 1.0, 1.0, 1.0])
    ell_up = eta_inv @ ell
    scale = float(ell @ ell)
    return (abs(float(ell @ eta_inv @ ell)) / scale,
            abs(float(ell_up @ g @ ell_up)) / scale)


# ---------------------------------------------------------------------------
# coefficient table


def _factors(p: KerrParams):
    """(i,j) -> (g_plus, g_minus) closures of spatial (x, y, z)."""
    m, a = p.m, p.a

    def r(x, y, z):
        return kerr_r(x, y, z, a)

    def D(x, y, z):
        return r(x, y, z) ** 4 + a * a * np.asarray(z) ** 2

    def A2(x, y, z):
        return r(x, y, z) ** 2 + a * a

    return {
        (0, 0): (lambda x, y, z: 2 * m * r(x, y, z) ** 3 - D(x, y, z),
                 D),
        (0, 1): (lambda x, y, z: 2 * m * r(x, y, z) ** 3 * (r(x, y, z) * x + a * y),
                 lambda x, y, z: D(x, y, z) * A2(x, y, z)),
        (0, 2): (lambda x, y, z: 2 * m * r(x, y, z) ** 3 * (r(x, y, z) * y - a * x),
                 lambda x, y, z: D(x, y, z) * A2(x, y, z)),
        (0, 3): (lambda x, y, z: 2 * m * r(x, y, z) ** 2 * np.asarray(z),
                 D),
        (1, 1): (lambda x, y, z: 2 * m * r(x, y, z) ** 3 * (r(x, y, z) * x + a * y) ** 2
                 + A2(x, y, z) ** 2,
                 lambda x, y, z: D(x, y, z) * A2(x, y, z) ** 2),
        (1, 2): (lambda x, y, z: 2 * m * r(x, y, z) ** 3
                 * (r(x, y, z) * x + a * y) * (r(x, y, z) * y - a * x),
                 lambda x, y, z: D(x, y, z) * A2(x, y, z) ** 2),
        (1, 3): (lambda x, y, z: 2 * m * r(x, y, z) ** 2
                 * (r(x, y, z) * x + a * y) * np.asarray(z),
                 lambda x, y, z: D(x, y, z) * A2(x, y, z) ** 2),
        (2, 2): (lambda x, y, z: 2 * m * r(x, y, z) ** 3 * (r(x, y, z) * y - a * x) ** 2
                 + A2(x, y, z) ** 2,
                 lambda x, y, z: D(x, y, z) * A2(x, y, z) ** 2),
        (2, 3): (lambda x, y, z: 2 * m * r(x, y, z) ** 2 * np.asarray(z)
                 * (r(x, y, z) * y - a * x),
                 lambda x, y, z: D(x, y, z) * A2(x, y, z) ** 2),
        (3, 3): (lambda x, y, z: 2 * m * r(x, y, z) * np.asarray(z) ** 2 + D(x, y, z),
                 D),
    }


@dataclass
class KerrCoefficientEntry:
    index_pair: tuple
    gplus: object
    gminus: object
    n_locus: str
    o_loci: tuple
    designated_index: int


def kerr_coefficients(p: KerrParams) -> dict:
    """The ten independent coefficient entries with their locus assignments
    and designated indices; the index table is verified against the fixed
    table at construction (regression guard)."""
    fac = _factors(p)
    out = {}
    for ij, (gp, gm) in fac.items():
        n_loc, o_loc = LOCUS_ASSIGNMENT[ij]
        idx = DESIGNATED_INDEX[ij]
        out[ij] = KerrCoefficientEntry(index_pair=ij, gplus=gp, gminus=gm,
                                       n_locus=n_loc, o_loci=o_loc,
                                       designated_index=idx)
    table = {ij: e.designated_index for ij, e in out.items()}
    if table != DESIGNATED_INDEX:
        raise IndexTableMismatch("designated-index table drifted: %r" % table)
    return out


# ---------------------------------------------------------------------------
# loci and representative set


def kerr_loci(p: KerrParams) -> dict:
    """Parametrized loci U0..U5 and the per-coefficient assignment table."""
    m, a = p.m, p.a
    rp, rm = p.r_plus, p.r_minus

    def ring(theta):
        return a * np.cos(theta), a * np.sin(theta), np.zeros_like(theta)

    def horizon(rpm):
        def surf(theta, zz):
            rr2 = 2 * m * rpm - (2 * m / rpm) * zz ** 2
            rho = np.sqrt(np.maximum(rr2, 0.0))
            return rho * np.cos(theta), rho * np.sin(theta), zz
        return surf

    surfaces = {
        "U0": {"kind": "ring", "param": ring,
               "equation": "x^2+y^2=a^2, z=0"},
        "U1": {"kind": "surface", "param": horizon(rp),
               "equation": "x^2+y^2+(2m/r+) z^2 = 2m r+"},
        "U2": {"kind": "surface", "param": horizon(rm),
               "equation": "x^2+y^2+(2m/r-) z^2 = 2m r-"},
        "U3": {"kind": "level", "equation": "r x + a y = 0",
               "fn": lambda x, y, z: kerr_r(x, y, z, a) * x + a * y},
        "U4": {"kind": "level", "equation": "r y - a x = 0",
               "fn": lambda x, y, z: kerr_r(x, y, z, a) * y - a * x},
        "U5": {"kind": "halfplane", "equation": "z=0, x^2+y^2>a^2"},
    }
    return {"surfaces": surfaces, "assignment": dict(LOCUS_ASSIGNMENT)}


def representative_set(p: KerrParams, res=(4, 8, 33, 8)) -> Chart:
    """The box 0<t<1, 0<x,y<sqrt(2)a/2+eps, z^2<(r+ + eps)^2 with chart
    axis order (t, x, z, y) and z the blow-up axis (index 2)."""
    xy_hi = np.sqrt(2.0) * p.a / 2.0 + p.eps
    z_hi = p.r_plus + p.eps
    lo = 1e-9
    bounds = ((lo, 1.0), (lo, xy_hi), (-z_hi, z_hi), (lo, xy_hi))
    return Chart(bounds, res)


BLOWUP_AXIS = 2   # z in the (t, x, z, y) chart order


def _ray_locus_positions(entry: KerrCoefficientEntry, x: float, y: float,
                         z_lo: float, z_hi: float, eps: float,
                         grid_h: float = 0.0, n_samples: int = 2001):
    """Sorted (position, kind, touching) locus roots along the z-ray.

    Roots closer than the cluster radius max(eps, 4.5*grid_h) are merged
    into one effective locus (neither the tube construction nor the target
    grid can resolve sub-cluster structure; near the ring the inner
    numerator roots coalesce with the disk): the cluster sits at its median
    root, crosses iff it contains an odd number of sign-changing roots, and
    is typed NO when both factors participate.
    """
    zs = np.linspace(z_lo, z_hi, n_samples)
    out = []
    for f, kind in ((entry.gminus, "N"), (entry.gplus, "O")):
        vals = np.asarray(f(x, y, zs), dtype=float)
        roots = normal_form._ray_roots(vals, zs,
                                       lambda zz: float(f(x, y, zz)))
        out += [(r, kind, tang) for r, tang in roots]
    out.sort()
    radius = max(eps, 4.5 * grid_h)
    clusters = []
    for item in out:
        if clusters and item[0] - clusters[-1][-1][0] < radius:
            clusters[-1].append(item)
        else:
            clusters.append([item])
    merged = []
    for cl in clusters:
        if len(cl) == 1:
            merged.append(cl[0])
            continue
        # coalesced roots always touch: the amplitude is blind to factor
        # signs, and the z = 0 coalescence keeps its phase plateau at
        # +sqrt(2)/2 on both sides
        pos = cl[len(cl) // 2][0]
        kinds = {k for _, k, _ in cl}
        kind = "NO" if len(kinds) > 1 else kinds.pop()
        merged.append((pos, kind, True))
    return merged


def kerr_normal_forms(p: KerrParams, chart: Chart) -> dict:
    """Normal forms for all ten coefficients on the representative chart.

    Fields are t-independent; kappa is built per (x, y) ray and broadcast
    over t.  Raises IndexTableMismatch if the designated indices disagree
    with the fixed table.
    """
    entries = kerr_coefficients(p)
    t_ax, x_ax, z_ax, y_ax = (chart.axis(0), chart.axis(1),
                              chart.axis(2), chart.axis(3))
    z_lo, z_hi = chart.bounds[BLOWUP_AXIS]
    out = {}
    for ij, entry in entries.items():
        kap3 = np.zeros((len(x_ax), len(z_ax), len(y_ax)))
        n_sig, o_sig = {}, {}
        for ix, xv in enumerate(x_ax):
            for iy, yv in enumerate(y_ax):
                merged = _ray_locus_positions(entry, xv, yv, z_lo, z_hi, p.eps,
                                              chart.spacing(BLOWUP_AXIS))
                kap3[ix, :, iy] = normal_form._kappa_ray(z_ax, merged, p.eps)
                for z, kind, _ in merged:
                    (n_sig if kind in ("N", "NO") else o_sig).setdefault(
                        (ix, iy), []).append(z)
        kappa = np.broadcast_to(kap3[None, ...],
                                (len(t_ax),) + kap3.shape).copy()
        tt, xx, zz, yy = chart.grids()
        amp = np.abs(normal_form.sinc(np.asarray(entry.gminus(xx, yy, zz)))
                     * normal_form.sinc(np.asarray(entry.gplus(xx, yy, zz))))
        cos2 = np.cos(kappa) ** 2
        w = 0.5 * np.log(np.maximum(amp, normal_form.AMP_FLOOR)
                         / np.maximum(cos2, normal_form.COS2_FLOOR))

        def sig_array(d):
            if not d:
                return []
            nmax = max(len(v) for v in d.values())
            arrs = []
            for j in range(nmax):
                sig = np.full((len(x_ax), len(y_ax)), np.nan)
                for (ix, iy), v in d.items():
                    if j < len(v):
                        sig[ix, iy] = v[j]
                arrs.append(normal_form.Locus(sigma=sig, kind="?"))
            return arrs

        loci = normal_form.LocusSet(nondiff=sig_array(n_sig),
                                    rank_def=sig_array(o_sig), eps=p.eps)
        out[ij] = normal_form.NormalForm(
            w=w, kappa=kappa, s_index=entry.designated_index,
            loci=loci, blowup_axis=BLOWUP_AXIS)
    table = {ij: nf.s_index for ij, nf in out.items()}
    if table != DESIGNATED_INDEX:
        raise IndexTableMismatch("normal-form index table drifted: %r" % table)
    return out


# ---------------------------------------------------------------------------
# invariants


def _bundle_from_lams(lams: np.ndarray) -> hill.SpectrumBundle:
    n = (len(lams) - 1) // 2
    flags = []
    for i in range(1, n + 1):
        w = lams[2 * i] - lams[2 * i - 1]
        flags.append(w <= 1e-9 * (1.0 + abs(lams[2 * i])))
    return hill.SpectrumBundle(lams=lams, double_flags=flags)


def ray_invariant(p: KerrParams, entry: KerrCoefficientEntry, x: float,
                  y: float, z_lo: float, z_hi: float, m_trunc: int = 2,
                  n_ray: int = 257):
    """Period matrix of the optimized-potential spectrum for one (x, y)."""
    zs = np.linspace(z_lo, z_hi, n_ray)
    merged = _ray_locus_positions(entry, x, y, z_lo, z_hi, p.eps,
                                  (z_hi - z_lo) / (n_ray - 1))
    kap = normal_form._kappa_ray(zs, merged, p.eps)
    L = z_hi - z_lo
    s_fit = entry.designated_index // 2
    rng = kap.max() - kap.min()
    if rng < 1e-6:
        return curves.zero_period_matrix("kerr %s" % (entry.index_pair,)), None
    T, lam_s, J, _ = hill.fit_cos_period(np.sin(kap), L, s_fit,
                                         n_terms=max(8, s_fit + 2),
                                         t_grid=120)
    n_pairs = max(m_trunc + 2, s_fit + 1)
    lams, _ = fourier_oracle.cos_family_spectrum(L, T, n_pairs, dim=48)
    bundle = _bundle_from_lams(lams)
    fp = "kerr m=%.17g a=%.17g ij=%s mtrunc=%d" % (p.m, p.a,
                                                   entry.index_pair, m_trunc)
    curve = curves.truncate_curve(bundle, m_trunc, fingerprint=fp)
    if curve is None:
        return curves.zero_period_matrix(fp), T
    return curves.period_matrix(curve), T


def kerr_invariants(p: KerrParams, points, m_trunc: int = 2,
                    coefficient=(0, 0), chart: Chart | None = None) -> list:
    """Period-matrix field over transverse (x, y) points for one coefficient.

    Returns [(x, y, PeriodMatrix, T)], t-independent by construction.
    """
    chart = chart or representative_set(p)
    z_lo, z_hi = chart.bounds[BLOWUP_AXIS]
    entry = kerr_coefficients(p)[coefficient]
    out = []
    for (x, y) in points:
        pm, T = ray_invariant(p, entry, float(x), float(y), z_lo, z_hi,
                              m_trunc)
        out.append((float(x), float(y), pm, T))
    return out


# ---------------------------------------------------------------------------
# preframe


def build_kerr_preframe(p: KerrParams, chart: Chart,
                        forms: dict | None = None) -> Preframe:
    """The four sections Psi_0..Psi_3 of the closing display over the chart.

    Chart axis order (t, x, z, y); for row i the (i,j) block contributes
    cos to the paired form slot and +/- sin to the conjugate vector slot:
    (i0): cos dt + sin dz-slot; (i1): cos dx + sin dy-slot;
    (i2): cos dy - sin dx-slot; (i3): cos dz - sin dt-slot.
    """
    forms = forms or kerr_normal_forms(p, chart)

    def wk(i, j):
        key = (min(i, j), max(i, j))
        nf = forms[key]
        return np.exp(nf.w), nf.kappa

    # chart axes: 0=t, 1=x, 2=z, 3=y
    FORM_SLOT = {0: 0, 1: 1, 2: 3, 3: 2}     # spacetime j -> chart form axis
    VEC_SLOT = {0: 2, 1: 3, 2: 1, 3: 0}      # spacetime j -> chart vector axis
    VEC_SIGN = {0: +1.0, 1: +1.0, 2: -1.0, 3: -1.0}
    sections = []
    for i in range(4):
        X = np.zeros((4,) + chart.shape)
        xi = np.zeros((4,) + chart.shape)
        for j in range(4):
            ew, kap = wk(i, j)
            xi[FORM_SLOT[j]] += ew * np.cos(kap)
            X[VEC_SLOT[j]] += VEC_SIGN[j] * ew * np.sin(kap)
        sections.append(CourantSection(X, xi))
    return Preframe(sections, chart)


def offtube_mask(p: KerrParams, chart: Chart, forms: dict) -> np.ndarray:
    """Grid mask that is True away from every locus tube of every coefficient."""
    zz = chart.grids()[BLOWUP_AXIS]
    mask = np.ones(chart.shape, dtype=bool)
    for nf in forms.values():
        for loc in nf.loci.all_loci:
            sig = np.asarray(loc.sigma)
            zvals = sig[np.isfinite(sig)]
            for z in np.unique(np.round(zvals, 6)):
                mask &= np.abs(zz - z) > 1.2 * p.eps
    return mask


def loci_to_csv(path, p: KerrParams, n_param: int = 64) -> None:
    info = kerr_loci(p)
    rows = []
    thetas = np.linspace(0, 2 * np.pi, n_param, endpoint=False)
    x, y, z = info["surfaces"]["U0"]["param"](thetas)
    for xv, yv, zv in zip(x, y, z):
        rows.append(["U0", float(xv), float(yv), float(zv)])
    for name in ("U1", "U2"):
        surf = info["surfaces"][name]["param"]
        zmax = np.sqrt(p.r_plus * p.r_plus)
        for zz in np.linspace(-0.9 * zmax, 0.9 * zmax, 9):
            x, y, z = surf(thetas, np.full_like(thetas, zz))
            for xv, yv, zv in zip(x, y, z):
                rows.append([name, float(xv), float(yv), float(zv)])
    write_csv(path, ["locus", "x", "y", "z"], rows)


def index_table_csv(path) -> None:
    rows = [[i, j, DESIGNATED_INDEX[(i, j)]] for (i, j) in sorted(DESIGNATED_INDEX)]
    write_csv(path, ["i", "j", "designated_index"], rows)
