"""Floquet theory for the Hill operator -d^2/dx^2 + q(x) on period 1.

Fundamental solutions y_1, y_2 satisfy the canonical initial data
y_1(0)=1, y_1'(0)=0, y_2(0)=0, y_2'(0)=1; the discriminant is
D(lam) = y_1(1,lam) + y_2'(1,lam).  The periodic spectrum
lam_0 < lam_1 <= lam_2 < lam_3 <= lam_4 < ... is the root set of
D^2 - 4, with D = +2 at indices i = 0,3 mod 4 and -2 at i = 1,2 mod 4.
Gap i is [lam_{2i-1}, lam_{2i}]; the tied spectrum mu_i (roots of
y_2(1,mu) = 0) interlaces, one per gap closure.

Eigenvalues are located by bracketing and root refinement on D -/+ 2;
near-double pairs are resolved through the local maximum of D^2 - 4 with a
curvature test, with the vertex pinned by the tied-spectrum root (exact at
a true double eigenvalue, where the monodromy is +/-Id).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar

from . import fourier_oracle
from .gridfield import write_csv

RTOL = 1e-12
ATOL = 1e-14
# |D^2-4| peaks below this are indistinguishable from integration noise
NOISE_FLOOR = 5e-12
DOUBLE_FLAG_SCALE = 1e-9


class SpectrumError(RuntimeError):
    pass


@dataclass
class HillPotential:
    """Smooth periodic potential on the unit period.

    Carries the original interval length for rescaling back to physical
    eigenvalues (lam_phys = lam_unit / L^2 under x -> x0 + L u).
    """

    fn: object
    L: float = 1.0
    samples: np.ndarray | None = None

    @classmethod
    def from_callable(cls, fn, L: float = 1.0) -> "HillPotential":
        return cls(fn=fn, L=float(L))

    @classmethod
    def from_samples(cls, values, L: float = 1.0) -> "HillPotential":
        """Samples on linspace(0, 1, n) including both endpoints; the two
        endpoint values must agree to 1e-10 (periodic continuation)."""
        vals = np.asarray(values, dtype=float)
        scale = max(1.0, np.max(np.abs(vals)))
        if abs(vals[-1] - vals[0]) > 1e-10 * scale:
            raise ValueError("periodic continuation not continuous")
        closed = vals.copy()
        closed[-1] = closed[0]
        xs = np.linspace(0.0, 1.0, len(vals))
        spl = CubicSpline(xs, closed, bc_type="periodic")
        return cls(fn=lambda x: spl(np.mod(x, 1.0)), L=float(L), samples=vals)

    def __call__(self, x):
        return self.fn(x)

    @property
    def mean(self) -> float:
        xs = np.linspace(0.0, 1.0, 2048, endpoint=False)
        return float(np.mean(self.fn(xs)))


@dataclass
class SpectrumBundle:
    """Ordered periodic eigenvalues with tied/reflecting spectra and gaps."""

    lams: np.ndarray
    mu: np.ndarray | None = None
    nu: np.ndarray | None = None
    double_flags: list = field(default_factory=list)
    disc_values: np.ndarray | None = None

    @property
    def n_pairs(self) -> int:
        return (len(self.lams) - 1) // 2

    def gap(self, i: int) -> tuple:
        return (self.lams[2 * i - 1], self.lams[2 * i])

    def gap_widths(self) -> np.ndarray:
        return np.array([self.lams[2 * i] - self.lams[2 * i - 1]
                         for i in range(1, self.n_pairs + 1)])

    def validate_ordering(self) -> None:
        d = np.diff(self.lams)
        if np.any(d < -1e-9 * (1.0 + np.abs(self.lams[1:]))):
            raise SpectrumError("periodic eigenvalues out of order")


def monodromy(q, lam: float, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Fundamental 2x2 matrix [[y1, y2], [y1', y2']] at x = 1."""
    qf = q.fn if isinstance(q, HillPotential) else q

    def rhs(x, Y):
        c = qf(x) - lam
        return (Y[2], Y[3], c * Y[0], c * Y[1])

    sol = solve_ivp(rhs, (0.0, 1.0), (1.0, 0.0, 0.0, 1.0), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise SpectrumError("integrator failed at lam=%g" % lam)
    y1, y2, y1p, y2p = sol.y[:, -1]
    return np.array([[y1, y2], [y1p, y2p]])


def discriminant(q, lam: float) -> float:
    M = monodromy(q, lam)
    return M[0, 0] + M[1, 1]


def wronskian_defect(q, lam: float) -> float:
    return abs(np.linalg.det(monodromy(q, lam)) - 1.0)


def _dirichlet_root(q, lo: float, hi: float):
    """Root of y2(1, .) in (lo, hi) if a sign change is present."""
    f = lambda lam: monodromy(q, lam)[0, 1]
    a, b = f(lo), f(hi)
    if a == 0.0:
        return lo
    if b == 0.0:
        return hi
    if np.sign(a) == np.sign(b):
        return None
    return brentq(f, lo, hi, xtol=1e-13, rtol=1e-15)


def periodic_spectrum(q, n: int, tied: bool = True,
                      reflecting: bool = False) -> SpectrumBundle:
    """First 2n+1 periodic eigenvalues of -d^2/dx^2 + q.

    Bracket seeds come from the asymptotic law lam_{2i-1}, lam_{2i} ~
    i^2 pi^2 + mean(q); the lowest eigenvalue is the first downward
    crossing of D = 2.
    """
    if n < 1:
        raise ValueError("n >= 1 required")
    qp = q if isinstance(q, HillPotential) else HillPotential.from_callable(q)
    qbar = qp.mean
    disc = lambda lam: discriminant(qp, lam)

    lo = qbar - 3.0
    while disc(lo) < 2.0:
        lo -= max(2.0, abs(lo))
    hi = lo + 0.5
    while disc(hi) >= 2.0:
        hi += 0.5
    lam0 = brentq(lambda l: disc(l) - 2.0, lo, hi, xtol=1e-13, rtol=1e-15)
    lams = [lam0]
    flags = []
    prev_top = lam0
    for i in range(1, n + 1):
        target = 2.0 if i % 2 == 0 else -2.0
        sgn = 1.0 if target > 0 else -1.0
        f = lambda l: sgn * (disc(l) - target)  # >= 0 inside gap i
        c = i * i * np.pi * np.pi + qbar
        lo_w = max(prev_top + 0.05 * (c - prev_top), c - 0.45 * max(2 * i - 1, 1) * np.pi ** 2)
        hi_w = c + 0.45 * (2 * i + 1) * np.pi ** 2
        res = minimize_scalar(lambda l: -f(l), bounds=(lo_w, hi_w),
                              method="bounded",
                              options={"xatol": 1e-9 * (1.0 + abs(c))})
        vert, fpeak = float(res.x), float(-res.fun)
        scale = 1.0 + abs(vert)
        mu_v = _dirichlet_root(qp, max(lo_w, vert - 0.5 * scale),
                               min(hi_w, vert + 0.5 * scale))
        if fpeak <= NOISE_FLOOR:
            v = mu_v if mu_v is not None else vert
            lams += [v, v]
            flags.append(True)
        else:
            hwin = max(3.0 * np.sqrt(fpeak), 1e-5 * scale)
            xs = np.linspace(vert - hwin, vert + hwin, 11)
            coef = np.polyfit(xs - vert, [f(x) for x in xs], 2)
            curv = -coef[0]
            if curv > 0 and fpeak > 1e4 * NOISE_FLOOR:
                edges = []
                for direc in (-1.0, 1.0):
                    step = max(np.sqrt(fpeak / curv), 1e-7 * scale)
                    x = vert
                    while f(x + direc * step) > 0:
                        x += direc * step
                    a, b = sorted((x, x + direc * step))
                    edges.append(brentq(f, a, b, xtol=1e-13, rtol=1e-15))
                lams += sorted(edges)
                flags.append(False)
            elif curv > 0:
                vfit = vert + coef[1] / (2.0 * curv)
                fpk = float(np.polyval(coef, vfit - vert))
                wh = np.sqrt(max(fpk, 0.0) / curv)
                if 2.0 * wh < DOUBLE_FLAG_SCALE * scale and mu_v is not None:
                    lams += [mu_v, mu_v]
                    flags.append(True)
                else:
                    lams += [vfit - wh, vfit + wh]
                    flags.append(2.0 * wh < DOUBLE_FLAG_SCALE * scale)
            else:
                v = mu_v if mu_v is not None else vert
                lams += [v, v]
                flags.append(True)
        prev_top = lams[-1]

    lams = np.array(lams)
    dvals = np.array([disc(l) for l in lams])
    for j, d in enumerate(dvals):
        want = 2.0 if j % 4 in (0, 3) else -2.0
        if abs(d - want) > 1e-6 * (1.0 + abs(lams[j])):
            raise SpectrumError(
                "discriminant sign pattern violated at index %d: D=%.3e" % (j, d))
    bundle = SpectrumBundle(lams=lams, double_flags=flags, disc_values=dvals)
    bundle.validate_ordering()
    if tied:
        bundle.mu = tied_spectrum(qp, n, bundle)
    if reflecting:
        bundle.nu = reflecting_spectrum(qp, n, bundle)
    return bundle


def tied_spectrum(q, n: int, bundle: SpectrumBundle | None = None) -> np.ndarray:
    """Dirichlet-type roots mu_i of y2(1, mu) = 0, one per gap closure."""
    qp = q if isinstance(q, HillPotential) else HillPotential.from_callable(q)
    if bundle is None:
        bundle = periodic_spectrum(qp, n, tied=False)
    mus = []
    for i in range(1, n + 1):
        a, b = bundle.gap(i)
        scale = 1.0 + abs(b)
        if b - a <= DOUBLE_FLAG_SCALE * scale:
            mus.append(0.5 * (a + b))
            continue
        pad = 1e-11 * scale
        root = _dirichlet_root(qp, a - pad, b + pad)
        if root is None:
            # endpoint root (even potentials): take the endpoint with the
            # smaller |y2|
            va = abs(monodromy(qp, a)[0, 1])
            vb = abs(monodromy(qp, b)[0, 1])
            lim = 1e-6 * scale
            if min(va, vb) > lim:
                raise SpectrumError(
                    "no tied-spectrum root in gap %d: y2 in [%g, %g] "
                    "has |y2|=(%.2e, %.2e)" % (i, a, b, va, vb))
            root = a if va < vb else b
        mus.append(root)
    mus = np.array(mus)
    for i in range(1, n + 1):
        a, b = bundle.gap(i)
        if not (a - 1e-8 * (1 + abs(a)) <= mus[i - 1] <= b + 1e-8 * (1 + abs(b))):
            raise SpectrumError("tied spectrum fails interlacing in gap %d" % i)
    return mus


def reflecting_spectrum(q, n: int, bundle: SpectrumBundle | None = None,
                        functional: str = "neumann") -> np.ndarray:
    """Roots nu_0 <= nu_1 <= ... under the derivative-vanishing boundary
    conditions f'(0) = f'(1) = 0 (default: roots of y1'(1, nu)).

    functional="literal" uses roots of y1(1, nu) = 0 instead: the source
    text states that functional alongside Neumann boundary conditions; the
    boundary conditions win by default and the literal form stays behind
    this flag.
    """
    qp = q if isinstance(q, HillPotential) else HillPotential.from_callable(q)
    if bundle is None:
        bundle = periodic_spectrum(qp, n, tied=False)
    if functional == "neumann":
        val = lambda lam: monodromy(qp, lam)[1, 0]
    elif functional == "literal":
        # roots of y1(1, .) sit inside the stability bands; locate them by
        # a sign-change scan instead of the per-gap search
        val = lambda lam: monodromy(qp, lam)[0, 0]
        lo = bundle.lams[0] - 5.0
        hi = max(bundle.lams[-1], (n + 1.5) ** 2 * np.pi ** 2
                 + abs(qp.mean)) + 5.0
        grid = np.linspace(lo, hi, 60 * (n + 2))
        vals = [val(l) for l in grid]
        roots = []
        for a, b, va, vb in zip(grid, grid[1:], vals, vals[1:]):
            if np.sign(va) != np.sign(vb):
                roots.append(brentq(val, a, b, xtol=1e-12, rtol=1e-15))
            if len(roots) > n:
                break
        if len(roots) < n + 1:
            raise SpectrumError("fewer than n+1 roots of y1(1, .) located")
        return np.array(roots[:n + 1])
    else:
        raise ValueError("unknown functional %r" % functional)

    nus = []
    # extra root nu_0 in (-inf, lam_0]
    lam0 = bundle.lams[0]
    lo = lam0 - 1.0
    v_top = val(lam0 + 0.0)
    while np.sign(val(lo)) == np.sign(v_top) and lo > lam0 - 300.0:
        lo -= max(1.0, abs(lo) * 0.5)
    if np.sign(val(lo)) != np.sign(v_top):
        nus.append(brentq(val, lo, lam0, xtol=1e-13, rtol=1e-15))
    else:
        nus.append(lam0)  # degenerate: root at the band edge
    for i in range(1, n + 1):
        a, b = bundle.gap(i)
        scale = 1.0 + abs(b)
        if b - a <= DOUBLE_FLAG_SCALE * scale:
            nus.append(0.5 * (a + b))
            continue
        pad = 1e-11 * scale
        fa, fb = val(a - pad), val(b + pad)
        if np.sign(fa) != np.sign(fb):
            nus.append(brentq(val, a - pad, b + pad, xtol=1e-13, rtol=1e-15))
        else:
            va, vb = abs(fa), abs(fb)
            if min(va, vb) > 1e-6 * scale:
                raise SpectrumError("no reflecting root in gap %d" % i)
            nus.append(a if va < vb else b)
    return np.array(nus)


def rescale_period(q_fn, x1m: float, x1p: float):
    """Affine reduction of a potential on [x1m, x1p] to the unit period.

    Returns (HillPotential on [0,1], scale) with unit-problem eigenvalues
    equal to scale * physical eigenvalues, scale = L^2.
    """
    L = float(x1p - x1m)
    if L <= 0:
        raise ValueError("period length must be positive")
    unit = HillPotential.from_callable(
        lambda u: L * L * np.asarray(q_fn(x1m + L * np.mod(u, 1.0))), L=L)
    return unit, L * L


def isospectral_check(q1, q2, n: int, tol: float = 1e-7) -> bool:
    """Compare the first 2n+1 periodic eigenvalues of two potentials."""
    b1 = periodic_spectrum(q1, n, tied=False)
    b2 = periodic_spectrum(q2, n, tied=False)
    scale = 1.0 + np.abs(b1.lams)
    return bool(np.all(np.abs(b1.lams - b2.lams) <= tol * scale))


# ---------------------------------------------------------------------------
# optimized-potential fit


@dataclass
class OptimizedPotential:
    """Result of the per-ray cosine-family fit.

    T is the period function over the transverse grid; degenerate rays
    (constant or purely linear phase) carry the constant-potential
    convention T(x1) = x1 / (2 pi) and a zero objective.
    """

    T: np.ndarray
    lam_s: np.ndarray
    objective: np.ndarray
    degenerate: np.ndarray
    L: float
    s_index: int
    iterations: list = field(default_factory=list)


def _penalty(sin_kappa, xs, L, T, s_index, info):
    want = sin_kappa / max(np.linalg.norm(sin_kappa), 1e-300)
    f = fourier_oracle.eigenfunction_samples(info, 2 * s_index, xs)
    f = f / max(np.linalg.norm(f), 1e-300)
    return min(float(np.sum((want - f) ** 2)),
               float(np.sum((want + f) ** 2)))


def fit_cos_period(sin_kappa: np.ndarray, L: float, s_index: int,
                   n_terms: int = 20, t_grid: int = 200,
                   penalty_weight: float = 1.0):
    """Fit T in the potential family cos(x1/T) for one transverse ray.

    Minimizes the target-spectrum objective (constant-potential eigenvalue
    targets lam^c_{2s} = s^2 pi^2 / L + 1 with 2^{-s} weights) plus a
    least-squares penalty tying the designated eigenfunction to sin(kappa).
    Returns (T, lam_s, objective, history).
    """
    s_top = max(min(n_terms, 20), s_index + 1)
    xs = np.linspace(0.0, 1.0, len(sin_kappa))
    targets = np.array([s * s * np.pi * np.pi / L + 1.0
                        for s in range(0, s_top + 1)])

    def objective(T):
        lams, info = fourier_oracle.cos_family_spectrum(L, T, s_top, dim=48)
        J = (targets[0] - lams[0]) ** 2
        for s in range(1, s_top + 1):
            J += 2.0 ** (-s) * ((targets[s] - lams[2 * s - 1]) ** 2
                                + (targets[s] - lams[2 * s]) ** 2)
        if penalty_weight:
            J += penalty_weight * _penalty(sin_kappa, xs, L, T, s_index, info)
        return float(J)

    Ts = np.exp(np.linspace(np.log(L / (40.0 * np.pi)),
                            np.log(4.0 * L / np.pi), t_grid))
    vals = [objective(T) for T in Ts]
    j = int(np.argmin(vals))
    if j == 0 or j == len(Ts) - 1:
        best_T, best_J = Ts[j], vals[j]
    else:
        res = minimize_scalar(objective, bracket=(Ts[j - 1], Ts[j], Ts[j + 1]),
                              method="golden", options={"xtol": 1e-8})
        best_T, best_J = float(res.x), float(res.fun)
        if best_J > vals[j]:
            raise SpectrumError("objective non-improving over the T grid")
    lam_fit, _ = fourier_oracle.cos_family_spectrum(L, best_T, s_top, dim=48)
    history = sorted(vals, reverse=True)
    return best_T, float(lam_fit[2 * s_index]), best_J, history


def fit_optimized_potential(kappa: np.ndarray, s_index: int, L: float,
                            blowup_axis: int = 0, n_terms: int = 20,
                            t_grid: int = 200) -> OptimizedPotential:
    """Optimized-potential fit over all transverse rays of a kappa field."""
    kap = np.moveaxis(np.asarray(kappa, dtype=float), blowup_axis, -1)
    tshape = kap.shape[:-1]
    T = np.zeros(tshape)
    lam_s = np.zeros(tshape)
    obj = np.zeros(tshape)
    degen = np.zeros(tshape, dtype=bool)
    iterations = []
    for idx in np.ndindex(*tshape) if tshape else [()]:
        ray = kap[idx] if tshape else kap
        rng = ray.max() - ray.min()
        xs = np.linspace(0.0, 1.0, len(ray))
        lin = np.polyfit(xs, ray, 1)
        lin_res = np.max(np.abs(ray - np.polyval(lin, xs)))
        if rng < 1e-6 or lin_res < 1e-8 * max(rng, 1.0):
            degen[idx] = True
            T[idx] = L / (2.0 * np.pi)   # T(x1) = x1/(2 pi) convention
            lam_s[idx] = np.nan
            obj[idx] = 0.0
            continue
        t, ls, J, hist = fit_cos_period(np.sin(ray), L, s_index,
                                        n_terms=n_terms, t_grid=t_grid)
        T[idx], lam_s[idx], obj[idx] = t, ls, J
        iterations.append(hist)
    return OptimizedPotential(T=T, lam_s=lam_s, objective=obj,
                              degenerate=degen, L=L, s_index=s_index,
                              iterations=iterations)


# ---------------------------------------------------------------------------
# exports


def spectrum_to_csv(path, bundle: SpectrumBundle) -> None:
    rows = []
    widths = {2 * i: w for i, w in enumerate(bundle.gap_widths(), start=1)}
    for j, lam in enumerate(bundle.lams):
        rows.append([j, float(lam),
                     float(bundle.disc_values[j]) if bundle.disc_values is not None else float("nan"),
                     float(widths.get(j, 0.0))])
    write_csv(path, ["index", "lambda", "discriminant", "gap_width"], rows)


def potential_manifest(path, family: str, T: float, L: float, mean: float) -> None:
    with open(path, "w") as fh:
        fh.write("family %s\nT %.17g\nL %.17g\nmean %.17g\n" % (family, T, L, mean))
