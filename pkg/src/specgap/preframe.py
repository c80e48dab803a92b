"""Numerical Courant-algebroid layer on a Darboux chart.

Sections are pairs X + xi of a vector field and a 1-form sampled on the
chart grid.  With the reference form omega = sum_i dx_i ^ dx_{i+k}, the
musical maps combine into the bundle automorphism

    (omega^sharp - pi^sharp)(X + xi) = omega^sharp(X) - pi^sharp(xi),

which squares to -Id; in components both halves are multiplication by the
block matrix Om = [[0, -I], [I, 0]].  The bracket is

    [e1, e2] = [X1, X2] + L_{X1} xi2 - L_{X2} xi1 + d(e1, e2)_-

with (e1, e2)_pm = (1/2)(<xi1, X2> pm <xi2, X1>).  Derivatives use
second-order central differences on the interior, one-sided at the
boundary; the outermost cell is excluded from all pass/fail checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridfield import Chart

RANK_TOL = 1e-8


@dataclass
class CourantSection:
    """Vector components X and form components xi over a chart grid.

    Arrays have shape (2k, *chart.res), component index first.
    """

    X: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.X.shape != self.xi.shape:
            raise ValueError("X and xi shapes differ")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.xi))):
            raise ValueError("section values must be finite")

    @classmethod
    def from_callables(cls, chart: Chart, X_fns, xi_fns) -> "CourantSection":
        grids = chart.grids()
        zeros = np.zeros(chart.shape)

        def stack(fns):
            comps = []
            for f in fns:
                comps.append(zeros if f is None else np.broadcast_to(
                    np.asarray(f(*grids), dtype=float), chart.shape).copy())
            return np.stack(comps)

        return cls(stack(X_fns), stack(xi_fns))

    def conforms(self, chart: Chart) -> bool:
        return self.X.shape == (chart.dim,) + chart.shape

    def __add__(self, other):
        return CourantSection(self.X + other.X, self.xi + other.xi)

    def __sub__(self, other):
        return CourantSection(self.X - other.X, self.xi - other.xi)

    def __neg__(self):
        return CourantSection(-self.X, -self.xi)

    def scale(self, c):
        return CourantSection(c * self.X, c * self.xi)


@dataclass
class Preframe:
    """2k-tuple of sections spanning, with its bundle-map images, the whole
    of TM + T*M with trivial intersection."""

    sections: list
    chart: Chart

    def __post_init__(self):
        if len(self.sections) != self.chart.dim:
            raise ValueError("preframe needs 2k sections")
        for s in self.sections:
            if not s.conforms(self.chart):
                raise ValueError("section does not conform to chart")


def _omega_block(k: int) -> np.ndarray:
    Om = np.zeros((2 * k, 2 * k))
    Om[:k, k:] = -np.eye(k)
    Om[k:, :k] = np.eye(k)
    return Om


def bundle_map(s: CourantSection, chart: Chart) -> CourantSection:
    """omega^sharp(X) - pi^sharp(xi); applying twice negates the input."""
    if not s.conforms(chart):
        raise ValueError("section does not conform to chart")
    Om = _omega_block(chart.k)
    newX = np.einsum("ab,b...->a...", Om, s.xi)
    newxi = np.einsum("ab,b...->a...", Om, s.X)
    return CourantSection(newX, newxi)


def courant_pairing(e1: CourantSection, e2: CourantSection, sign: str = "+"):
    """Pointwise (1/2)(<xi1, X2> +/- <xi2, X1>)."""
    if e1.X.shape != e2.X.shape:
        raise ValueError("section dimension mismatch")
    a = np.einsum("a...,a...->...", e1.xi, e2.X)
    b = np.einsum("a...,a...->...", e2.xi, e1.X)
    if sign == "+":
        return 0.5 * (a + b)
    if sign == "-":
        return 0.5 * (a - b)
    raise ValueError("sign must be '+' or '-'")


def _grad(f: np.ndarray, chart: Chart) -> np.ndarray:
    """Gradient components, central differences (2nd order), shape (2k, *res)."""
    spac = [chart.spacing(i) for i in range(chart.dim)]
    return np.stack(np.gradient(f, *spac, edge_order=2))


def courant_bracket(e1: CourantSection, e2: CourantSection,
                    chart: Chart) -> CourantSection:
    """[X1,X2] + L_{X1} xi2 - L_{X2} xi1 + d(e1,e2)_-.

    The outermost grid cell uses one-sided stencils and is unreliable;
    callers should restrict checks to chart.interior().
    """
    if min(chart.res) < 4:
        raise ValueError("grid too coarse for the bracket")
    if not (e1.conforms(chart) and e2.conforms(chart)):
        raise ValueError("sections do not conform to chart")
    d = chart.dim
    gX1 = np.stack([_grad(e1.X[a], chart) for a in range(d)])   # [a, b, ...] = d_b X1^a
    gX2 = np.stack([_grad(e2.X[a], chart) for a in range(d)])
    gxi1 = np.stack([_grad(e1.xi[a], chart) for a in range(d)])
    gxi2 = np.stack([_grad(e2.xi[a], chart) for a in range(d)])

    lie = (np.einsum("b...,ab...->a...", e1.X, gX2)
           - np.einsum("b...,ab...->a...", e2.X, gX1))
    # (L_X xi)_a = X^b d_b xi_a + xi_b d_a X^b
    lxi2 = (np.einsum("b...,ab...->a...", e1.X, gxi2)
            + np.einsum("ba...,b...->a...", gX1, e2.xi))
    lxi1 = (np.einsum("b...,ab...->a...", e2.X, gxi1)
            + np.einsum("ba...,b...->a...", gX2, e1.xi))
    dpair = _grad(courant_pairing(e1, e2, "-"), chart)
    return CourantSection(lie, lxi2 - lxi1 + dpair)


def _span_matrix(p: Preframe) -> np.ndarray:
    """(npts, 4k, 4k) matrix: rows are sections then their images."""
    chart = p.chart
    rows = []
    for s in p.sections:
        rows.append(np.concatenate([s.X, s.xi], axis=0))
    for s in p.sections:
        im = bundle_map(s, chart)
        rows.append(np.concatenate([im.X, im.xi], axis=0))
    M = np.stack(rows, axis=0)                     # (4k, 4k, *res)
    return np.moveaxis(M.reshape(M.shape[0], M.shape[1], -1), -1, 0)


def is_preframe(p: Preframe, tol: float = RANK_TOL):
    """True iff the 4k x 4k span matrix has full numerical rank everywhere.

    Returns (flag, min-singular-value field relative to the local largest).
    """
    M = _span_matrix(p)
    sv = np.linalg.svd(M, compute_uv=False)
    rel = sv[:, -1] / np.maximum(sv[:, 0], 1e-300)
    fld = rel.reshape(p.chart.shape)
    return bool(np.min(rel) > tol), fld


def _bracket_tuple(p: Preframe) -> list:
    out = []
    n = len(p.sections)
    for i in range(n):
        for j in range(i + 1, n):
            out.append(courant_bracket(p.sections[i], p.sections[j], p.chart))
    return out


def annihilator(p: Preframe, chart: Chart | None = None, tol: float = RANK_TOL):
    """Pointwise solutions v of (Psi, v)_+ = ([Psi, Psi], v)_+ = 0.

    Returns (sections, dim_field): an orthonormal null basis per grid point
    (phase-aligned along the row-major sweep) padded with zeros where the
    local dimension is smaller, and the integer dimension field.
    """
    chart = chart or p.chart
    d = chart.dim
    cons = list(p.sections) + _bracket_tuple(p)
    # constraint row for (e, v)_+ = 0 on v = (X_v, xi_v): (xi_e | X_e)/2
    rows = [np.concatenate([e.xi, e.X], axis=0) for e in cons]
    M = np.stack(rows, axis=0).reshape(len(rows), 2 * d, -1)
    M = np.moveaxis(M, -1, 0)                      # (npts, ncons, 4k)
    npts = M.shape[0]
    dims = np.zeros(npts, dtype=int)
    basis = np.zeros((npts, 2 * d, 2 * d))
    prev = None
    for pt in range(npts):
        u, s, vh = np.linalg.svd(M[pt])
        smax = s[0] if len(s) else 0.0
        r = int(np.sum(s > tol * max(smax, 1.0)))
        null = vh[r:].T                            # (4k, dim)
        dims[pt] = null.shape[1]
        if prev is not None and null.shape[1] == prev.shape[1] and null.shape[1]:
            # align phases with the previous point for continuity
            ov = prev.T @ null
            flip = np.sign(np.diag(ov))
            flip[flip == 0] = 1.0
            null = null * flip[None, :]
        basis[pt, :, :null.shape[1]] = null
        prev = null
    dim_field = dims.reshape(chart.shape)
    ndim = int(dims.min())
    secs = []
    for j in range(ndim):
        vec = basis[:, :, j].T.reshape(2 * d, *chart.shape)
        secs.append(CourantSection(vec[:d], vec[d:]))
    return secs, dim_field


def weak_equivalence(p1: Preframe, p2: Preframe, tol: float = 1e-8,
                     grid: int = 64, descent_iters: int = 20):
    """Search constants (beta1, beta2) making all four pairing residuals of
    the weak-equivalence conditions vanish against an annihilator of p1.

    Returns (flag, (beta1, beta2), residual) or (False, None, reason).
    """
    secs, dim_field = annihilator(p1)
    if not secs:
        return False, None, "empty annihilator"
    v = secs[0]
    chart = p1.chart
    Bv = bundle_map(v, chart)
    inner = chart.interior()

    def residual_for(p, beta):
        rot = CourantSection(np.cos(beta) * v.X + np.sin(beta) * Bv.X,
                             np.cos(beta) * v.xi + np.sin(beta) * Bv.xi)
        worst = 0.0
        for s in p.sections:
            worst = max(worst, float(np.max(np.abs(
                courant_pairing(s, rot, "+")[inner]))))
        for br in _bracket_tuple(p):
            worst = max(worst, float(np.max(np.abs(
                courant_pairing(br, rot, "+")[inner]))))
        return worst

    def total(b1, b2):
        return max(residual_for(p1, b1), residual_for(p2, b2))

    betas = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    r1 = np.array([residual_for(p1, b) for b in betas])
    r2 = np.array([residual_for(p2, b) for b in betas])
    b1, b2 = betas[int(np.argmin(r1))], betas[int(np.argmin(r2))]
    step = 2 * np.pi / grid
    best = total(b1, b2)
    for _ in range(descent_iters):
        improved = False
        for db1, db2 in ((step, 0), (-step, 0), (0, step), (0, -step)):
            cand = total(b1 + db1, b2 + db2)
            if cand < best:
                best, b1, b2 = cand, b1 + db1, b2 + db2
                improved = True
        if not improved:
            step *= 0.5
    return best < tol, (float(b1 % (2 * np.pi)), float(b2 % (2 * np.pi))), best


def preternatural_generators(doubled: Chart) -> list:
    """The 2k commuting rotation generators K_l = xdot_l d/dx_l - x_l d/dxdot_l
    on the doubled chart (base coordinates first, conjugate coordinates after).

    Each generator is returned as a component array of shape (4k, *res).
    """
    d = doubled.dim
    if d % 4 != 0:
        raise ValueError("doubled chart must have dimension 4k")
    half = d // 2
    grids = doubled.grids()
    gens = []
    for l in range(half):
        comp = np.zeros((d,) + doubled.shape)
        comp[l] = grids[half + l]          # xdot_l in the d/dx_l slot
        comp[half + l] = -grids[l]         # -x_l in the d/dxdot_l slot
        gens.append(comp)
    return gens


def lie_derivative_constant_form(vec: np.ndarray, Om: np.ndarray,
                                 chart: Chart) -> np.ndarray:
    """(L_X Om)_{ab} for a constant 2-form Om, by central differences.

    Returns shape (d, d, *res); for the preternatural generators the result
    vanishes identically (linear fields, constant form).
    """
    d = chart.dim
    g = np.stack([_grad(vec[c], chart) for c in range(d)])  # [c, b, ...] = d_b X^c
    # (L_X Om)_{ab} = Om_{cb} d_a X^c + Om_{ac} d_b X^c for constant Om
    return (np.einsum("cb,ca...->ab...", Om, g)
            + np.einsum("ac,cb...->ab...", Om, g))


def darboux_regular_preframe(chart: Chart) -> Preframe:
    """Regular preframe {dx_i + pi^sharp(dx_i)} in Darboux coordinates."""
    d = chart.dim
    Om = _omega_block(chart.k)
    secs = []
    for i in range(d):
        xi = np.zeros((d,) + chart.shape)
        xi[i] = 1.0
        # pi^sharp(dx_i) = -Om e_i as a vector
        X = np.zeros((d,) + chart.shape)
        pivec = -Om[:, i]
        for a in range(d):
            X[a] = pivec[a]
        secs.append(CourantSection(X, xi))
    return Preframe(secs, chart)


def graph_section(chart: Chart, X_fns) -> CourantSection:
    """Section X + i_X omega of the symplectic graph subbundle."""
    d = chart.dim
    grids = chart.grids()
    X = np.stack([np.broadcast_to(np.asarray(f(*grids), dtype=float),
                                  chart.shape).copy() if f is not None
                  else np.zeros(chart.shape) for f in X_fns])
    Om = _omega_block(chart.k)
    xi = np.einsum("ab,b...->a...", Om, X)
    return CourantSection(X, xi)
