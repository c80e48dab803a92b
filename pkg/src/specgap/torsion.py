"""Lifted 4k-coframes, intrinsic torsion, derived invariants, e-structures.

A regularized preframe built from prolonged fields (w_hat, kappa_hat) lifts
to a coframe on the doubled chart (base coordinates x_0..x_{2k-1}, conjugate
coordinates x_{2k}..x_{4k-1}).  With 0-based rows and block sums over
j = 0..k-1:

    rows i in [0,k)   : sum_j e^{w[i,j]}  ( cos k[i,j] dx_j     + sin k[i,j] dx_{3k+j})
    rows k+i          : sum_j e^{w[k+i,j]}( cos k      dx_{k+j} - sin k      dx_{2k+j})
    rows 2k+i (compl.): sum_j e^{w[i,j]}  (-sin k      dx_j     + cos k      dx_{3k+j})
    rows 3k+i (compl.): sum_j e^{w[k+i,j]}(-sin k      dx_{k+j} - cos k      dx_{2k+j})

The complement rows follow the substitution sin -> cos, cos -> -sin.  The
structure group is the product of SO(2) blocks rotating the conjugate pairs
(Psi_r, Psi_{r+2k}); a constant block rotation by beta is exactly the phase
shift kappa_hat[r, :] += beta.

Structure equations: dPsi_i = sum_{m<s} Gamma^i_{ms} Psi_m ^ Psi_s.  The 2k
monomials on conjugate pairs (m, m+2k) are absorbed into the connection
forms and never appear among reported torsion coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gridfield import Chart, write_csv

RANK_THRESHOLD = 1e-7


class CoframeError(RuntimeError):
    pass


def _grad(f: np.ndarray, chart: Chart) -> list:
    spac = [chart.spacing(i) for i in range(chart.dim)]
    return np.gradient(f, *spac, edge_order=2)


def _row_blocks(k: int):
    """(row, j) -> (cos slot, sin slot, field row) in the doubled chart."""
    table = {}
    for i in range(k):
        for j in range(k):
            table[(i, j)] = (j, 3 * k + j, i)
            table[(k + i, j)] = (k + j, 2 * k + j, k + i)
            table[(2 * k + i, j)] = (j, 3 * k + j, i)
            table[(3 * k + i, j)] = (k + j, 2 * k + j, k + i)
    return table


def _trig_amplitudes(row: int, k: int, ck: np.ndarray, sk: np.ndarray):
    """(cos-slot amplitude, sin-slot amplitude) and their kappa-derivatives."""
    if row < k:
        return ck, sk, -sk, ck
    if row < 2 * k:
        return ck, -sk, -sk, -ck
    if row < 3 * k:
        return -sk, ck, -ck, -sk
    return -sk, -ck, -ck, sk


@dataclass
class LiftedCoframe:
    """Coframe matrix field A (Psi_u = sum_v A[u, v] dx_v) with inverse B."""

    A: np.ndarray
    B: np.ndarray
    chart: Chart
    what: np.ndarray | None = None
    kappahat: np.ndarray | None = None
    k: int | None = None

    @classmethod
    def from_matrix(cls, A: np.ndarray, chart: Chart) -> "LiftedCoframe":
        d = chart.dim
        if A.shape[:2] != (d, d):
            raise CoframeError("coframe matrix must be (dim, dim, *res)")
        Ai = np.moveaxis(A.reshape(d, d, -1), -1, 0)
        dets = np.abs(np.linalg.det(Ai)).reshape(chart.shape)
        inner = np.zeros(chart.shape, dtype=bool)
        inner[chart.interior()] = True
        if np.any(dets[inner] < 1e-12):
            raise CoframeError("coframe matrix singular at interior points")
        B = np.moveaxis(np.linalg.inv(Ai), 0, -1).reshape((d, d) + chart.shape)
        return cls(A=A, B=B, chart=chart)


def lift_coframe(what: np.ndarray, kappahat: np.ndarray,
                 chart: Chart) -> LiftedCoframe:
    """Build the 4k-coframe from prolonged weights/phases on a doubled chart.

    what, kappahat: arrays of shape (2k, k, *chart.res); chart dim = 4k.
    """
    d = chart.dim
    if d % 4 != 0:
        raise CoframeError("doubled chart dimension must be 4k")
    k = d // 4
    what = np.asarray(what, dtype=float)
    kappahat = np.asarray(kappahat, dtype=float)
    if what.shape[:2] != (2 * k, k) or kappahat.shape[:2] != (2 * k, k):
        raise CoframeError("field arrays must have shape (2k, k, *res)")
    A = np.zeros((d, d) + chart.shape)
    for (row, j), (slot_c, slot_s, fr) in _row_blocks(k).items():
        ew = np.exp(what[fr, j])
        ck, sk = np.cos(kappahat[fr, j]), np.sin(kappahat[fr, j])
        amp_c, amp_s, _, _ = _trig_amplitudes(row, k, ck, sk)
        A[row, slot_c] += ew * amp_c
        A[row, slot_s] += ew * amp_s
    cf = LiftedCoframe.from_matrix(A, chart)
    cf.what, cf.kappahat, cf.k = what, kappahat, k
    return cf


def rotate_coframe(cf: LiftedCoframe, betas) -> LiftedCoframe:
    """Structure-group action: constant SO(2) rotation of each conjugate
    block, realized as the phase shift kappa_hat[r, :] += beta_r."""
    if cf.kappahat is None:
        raise CoframeError("rotation needs the underlying fields")
    betas = np.asarray(betas, dtype=float)
    if betas.shape != (2 * cf.k,):
        raise CoframeError("need one beta per conjugate block (2k values)")
    kap = cf.kappahat.copy()
    for r in range(2 * cf.k):
        kap[r] = kap[r] + betas[r]
    return lift_coframe(cf.what, kap, cf.chart)


# ---------------------------------------------------------------------------
# torsion


@dataclass
class TorsionTensor:
    """Coefficients Gamma[i, m, s], antisymmetric in (m, s); conjugate-pair
    monomials are flagged absorbed and excluded from reports."""

    gamma: np.ndarray           # (4k, 4k, 4k, *res)
    absorbed_mask: np.ndarray   # (4k, 4k)
    chart: Chart

    def retained(self) -> np.ndarray:
        g = self.gamma.copy()
        g[:, self.absorbed_mask] = 0.0
        return g

    def max_abs_retained(self, interior: bool = True) -> float:
        g = self.retained()
        if interior:
            g = g[(slice(None),) * 3 + self.chart.interior()]
        return float(np.max(np.abs(g)))


def _absorbed_mask(d: int) -> np.ndarray:
    half = d // 2
    mask = np.zeros((d, d), dtype=bool)
    for m in range(half):
        mask[m, m + half] = mask[m + half, m] = True
    return mask


def _dpsi_generic(cf: LiftedCoframe) -> np.ndarray:
    """C[i, a, b] = d_a A[i, b] - d_b A[i, a] by differencing the coframe."""
    d = cf.chart.dim
    dA = np.empty((d, d, d) + cf.chart.shape)
    for i in range(d):
        for b in range(d):
            parts = _grad(cf.A[i, b], cf.chart)
            for a in range(d):
                dA[i, a, b] = parts[a]
    return dA - np.swapaxes(dA, 1, 2)


def _dpsi_formula(cf: LiftedCoframe) -> np.ndarray:
    """Same coefficients from the product-rule expansion in the derivatives
    of w_hat and kappa_hat (the four-term display route)."""
    if cf.what is None:
        raise CoframeError("formula path needs the underlying fields")
    d = cf.chart.dim
    k = cf.k
    C = np.zeros((d, d, d) + cf.chart.shape)
    gw = {}
    gk = {}
    for fr in range(2 * k):
        for j in range(k):
            gw[(fr, j)] = _grad(cf.what[fr, j], cf.chart)
            gk[(fr, j)] = _grad(cf.kappahat[fr, j], cf.chart)
    for (row, j), (slot_c, slot_s, fr) in _row_blocks(k).items():
        ew = np.exp(cf.what[fr, j])
        ck, sk = np.cos(cf.kappahat[fr, j]), np.sin(cf.kappahat[fr, j])
        amp_c, amp_s, dc, ds = _trig_amplitudes(row, k, ck, sk)
        for a in range(d):
            dw, dkap = gw[(fr, j)][a], gk[(fr, j)][a]
            C[row, a, slot_c] += ew * (dw * amp_c + dkap * dc)
            C[row, a, slot_s] += ew * (dw * amp_s + dkap * ds)
    return C - np.swapaxes(C, 1, 2)


def torsion(cf: LiftedCoframe, path: str = "formula") -> TorsionTensor:
    """Structure-equation coefficients on the chart grid.

    path="formula" differentiates the underlying (w_hat, kappa_hat) fields
    per the display expansion; path="generic" differentiates the assembled
    coframe matrix.  Both are second-order accurate and agree to O(h^2).
    Matrix-built coframes (no underlying fields) always use the generic
    path.
    """
    if cf.what is None:
        path = "generic"
    C = _dpsi_formula(cf) if path == "formula" else _dpsi_generic(cf)
    # dPsi_i = (1/2) C[i,a,b] dx_a ^ dx_b; dx_a = B[a,m] Psi_m, so the
    # ordered-pair coefficient is Gamma[i,m,s] = C[i,a,b] B[a,m] B[b,s]
    g = np.einsum("iab...,am...,bs...->ims...", C, cf.B, cf.B)
    return TorsionTensor(gamma=g, absorbed_mask=_absorbed_mask(cf.chart.dim),
                         chart=cf.chart)


def compound_minors(B_point: np.ndarray) -> np.ndarray:
    """Lexicographically ordered 2x2 minors b^{u^v}_{i^j} of a matrix;
    the compound of an invertible matrix is invertible."""
    d = B_point.shape[0]
    pairs = [(u, v) for u in range(d) for v in range(u + 1, d)]
    out = np.empty((len(pairs), len(pairs)))
    for r, (u, v) in enumerate(pairs):
        for c, (i, j) in enumerate(pairs):
            out[r, c] = (B_point[u, i] * B_point[v, j]
                         - B_point[u, j] * B_point[v, i])
    return out


def d2_residual(cf: LiftedCoframe) -> float:
    """d^2 Psi = 0 numerically: max over the interior of the cyclic sum of
    d_c C[i, a, b]; O(h^2) for smooth fields."""
    C = _dpsi_generic(cf)
    d = cf.chart.dim
    inner = cf.chart.interior()
    perm1 = (1, 2, 0) + tuple(range(3, 3 + cf.chart.dim))
    perm2 = (2, 0, 1) + tuple(range(3, 3 + cf.chart.dim))
    worst = 0.0
    for i in range(d):
        dC = np.empty((d, d, d) + cf.chart.shape)
        for a in range(d):
            for b in range(d):
                parts = _grad(C[i, a, b], cf.chart)
                for c in range(d):
                    dC[c, a, b] = parts[c]
        cyc = dC + np.transpose(dC, perm1) + np.transpose(dC, perm2)
        worst = max(worst, float(np.max(np.abs(
            cyc[(slice(None),) * 3 + inner]))))
    return worst


# ---------------------------------------------------------------------------
# group action


def _block_generators(d: int) -> list:
    half = d // 2
    gens = []
    for b in range(half):
        J = np.zeros((d, d))
        J[b, b + half] = 1.0
        J[b + half, b] = -1.0
        gens.append(J)
    return gens


def translation_prediction(T: TorsionTensor, betas) -> np.ndarray:
    """First-order change of Gamma under the block rotations:
    delta Gamma^i_{uv} = sum_b beta_b (J_{ip} G^p_{uv} + J_{um} G^i_{mv}
    + J_{vs} G^i_{us})."""
    g = T.gamma
    d = g.shape[0]
    delta = np.zeros_like(g)
    for b, J in zip(np.asarray(betas, dtype=float), _block_generators(d)):
        if b == 0.0:
            continue
        delta += b * (np.einsum("ip,pms...->ims...", J, g)
                      + np.einsum("um,ims...->ius...", J, g)
                      + np.einsum("vs,ims...->imv...", J, g))
    return delta


def group_action_check(cf: LiftedCoframe, betas):
    """Rotate the coframe, recompute torsion, and test the translation law.

    Returns (residual_linear, residual_exact) over the retained monomials on
    the interior: the first against the first-order translation prediction
    (O(beta^2) + O(h^2)), the second against the exact finite-rotation
    conjugation (pure discretization, O(h^2)); no multiplicative rescaling
    of the retained coefficients occurs in either.
    """
    betas = np.asarray(betas, dtype=float)
    if not np.any(betas):
        return 0.0, 0.0          # identity action, nothing to compare
    T0 = torsion(cf, path="formula")
    T1 = torsion(rotate_coframe(cf, betas), path="generic")
    d = cf.chart.dim
    half = d // 2
    R = np.eye(d)
    for b, beta in enumerate(np.asarray(betas, dtype=float)):
        blk = np.eye(d)
        blk[b, b] = blk[b + half, b + half] = np.cos(beta)
        blk[b, b + half] = np.sin(beta)
        blk[b + half, b] = -np.sin(beta)
        R = blk @ R
    g_exact = np.einsum("ip,um,vs,pms...->iuv...", R, R, R, T0.gamma)
    g_lin = T0.gamma + translation_prediction(T0, betas)

    def masked_max(diff):
        diff = diff.copy()
        diff[:, T0.absorbed_mask] = 0.0
        return float(np.max(np.abs(diff[(slice(None),) * 3
                                        + cf.chart.interior()])))

    return masked_max(T1.gamma - g_lin), masked_max(T1.gamma - g_exact)


# ---------------------------------------------------------------------------
# invariants, rank/order, e-structure equivalence


@dataclass
class InvariantSet:
    """Lexicographically ordered scalar invariants of the s-jet."""

    keys: list
    fields: np.ndarray         # (nfuncs, *res)
    depth: int
    chart: Chart


def invariant_set(cf: LiftedCoframe, depth: int,
                  max_fields: int = 40000) -> InvariantSet:
    """Torsion coefficients and their coframe covariant derivatives
    gamma_{|l} = sum_a B[a, l] d_a gamma up to the given jet depth."""
    T = torsion(cf, path="formula")
    d = cf.chart.dim
    keep = ~T.absorbed_mask
    keys, fields = [], []
    for i in range(d):
        for m in range(d):
            for s in range(m + 1, d):
                if keep[m, s]:
                    keys.append((i, m, s))
                    fields.append(T.gamma[i, m, s])
    all_keys, all_fields = list(keys), list(fields)
    level = list(zip(keys, fields))
    for _ in range(depth):
        nxt = []
        for key, f in level:
            grad = np.stack(_grad(f, cf.chart))
            cov = np.einsum("am...,a...->m...", cf.B, grad)
            for l in range(d):
                nxt.append((key + (l,), cov[l]))
        if len(all_keys) + len(nxt) > max_fields:
            raise CoframeError("invariant set too large; reduce depth")
        level = nxt
        for nk, nf in nxt:
            all_keys.append(nk)
            all_fields.append(nf)
    return InvariantSet(keys=all_keys, fields=np.stack(all_fields),
                        depth=depth, chart=cf.chart)


def _rank_at(inv: InvariantSet, point: tuple,
             threshold: float = RANK_THRESHOLD) -> int:
    """Numerical rank of the differential span at one grid point, using
    central differences on the stored fields."""
    chart = inv.chart
    d = chart.dim
    rows = np.empty((inv.fields.shape[0], d))
    for a in range(d):
        lo = list(point)
        hi = list(point)
        lo[a] = max(point[a] - 1, 0)
        hi[a] = min(point[a] + 1, chart.res[a] - 1)
        h = (hi[a] - lo[a]) * chart.spacing(a)
        rows[:, a] = (inv.fields[(slice(None),) + tuple(hi)]
                      - inv.fields[(slice(None),) + tuple(lo)]) / h
    sv = np.linalg.svd(rows, compute_uv=False)
    smax = max(float(sv[0]) if len(sv) else 0.0, 1e-300)
    return int(np.sum(sv > threshold * smax))


def rank_order(cf: LiftedCoframe, max_depth: int | None = None,
               threshold: float = RANK_THRESHOLD):
    """(rank, order, regular) at the chart center.

    order = smallest j with r_j = r_{j+1}; regular means the rank is
    constant over the center's grid neighborhood (the regularity hypothesis
    of the equivalence test).
    """
    d = cf.chart.dim
    max_depth = d if max_depth is None else max_depth
    center = tuple(n // 2 for n in cf.chart.res)
    neighborhood = [center]
    for a in range(d):
        for dlt in (-1, 1):
            p = list(center)
            p[a] = min(max(p[a] + dlt, 1), cf.chart.res[a] - 2)
            neighborhood.append(tuple(p))
    prev_rank = None
    for s in range(max_depth + 2):
        inv = invariant_set(cf, s)
        r = _rank_at(inv, center, threshold)
        if prev_rank is not None and r == prev_rank:
            regular = all(_rank_at(prev_inv, p, threshold) == prev_rank
                          for p in neighborhood)
            return prev_rank, s - 1, regular
        prev_rank, prev_inv = r, inv
    return prev_rank, max_depth + 1, False


@dataclass
class EquivalenceVerdict:
    equivalent: bool | None
    reason: str
    max_deviation: float = float("nan")
    matched_keys: list = field(default_factory=list)


def e_structure_equivalent(cf1: LiftedCoframe, cf2: LiftedCoframe,
                           tol: float = 1e-6) -> EquivalenceVerdict:
    """Cartan e-structure test.

    Equal rank and order are required; then r independent invariant
    functions are selected by identical lexicographic choices, sigma is
    built by matching their values on the grids, and the (order+1)-jet
    invariant sets are compared entrywise through sigma.
    """
    r1, o1, _ = rank_order(cf1)
    r2, o2, _ = rank_order(cf2)
    if (r1, o1) != (r2, o2):
        return EquivalenceVerdict(False, "rank/order mismatch: (%d,%d) vs "
                                  "(%d,%d)" % (r1, o1, r2, o2))
    j, r = o1, r1
    jet1 = invariant_set(cf1, j + 1)
    jet2 = invariant_set(cf2, j + 1)
    if r == 0:
        c1 = tuple(n // 2 for n in cf1.chart.res)
        c2 = tuple(n // 2 for n in cf2.chart.res)
        dev = float(np.max(np.abs(jet1.fields[(slice(None),) + c1]
                                  - jet2.fields[(slice(None),) + c2])))
        return EquivalenceVerdict(bool(dev <= tol), "constant invariants", dev)
    inv1 = invariant_set(cf1, j)
    inv2 = invariant_set(cf2, j)
    center = tuple(n // 2 for n in cf1.chart.res)
    d = cf1.chart.dim
    grads = np.empty((len(inv1.keys), d))
    for a in range(d):
        hi = list(center)
        lo = list(center)
        hi[a] += 1
        lo[a] -= 1
        h = 2 * cf1.chart.spacing(a)
        grads[:, a] = (inv1.fields[(slice(None),) + tuple(hi)]
                       - inv1.fields[(slice(None),) + tuple(lo)]) / h
    picked = []
    basis = np.zeros((0, d))
    gscale = max(float(np.max(np.abs(grads))), 1e-300)
    for idx in range(len(inv1.keys)):
        cand = np.vstack([basis, grads[idx][None, :]])
        sv = np.linalg.svd(cand, compute_uv=False)
        if np.sum(sv > RANK_THRESHOLD * gscale) > basis.shape[0]:
            picked.append(idx)
            basis = cand
        if len(picked) == r:
            break
    if len(picked) < r:
        return EquivalenceVerdict(None, "could not select independent "
                                        "invariant functions")
    keys = [inv1.keys[p] for p in picked]
    idx2 = [inv2.keys.index(kk) for kk in keys]
    in1, in2 = cf1.chart.interior(), cf2.chart.interior()
    H1 = np.stack([inv1.fields[p] for p in picked])[(slice(None),) + in1]
    H2 = np.stack([inv2.fields[p] for p in idx2])[(slice(None),) + in2]
    H1 = H1.reshape(r, -1).T
    H2 = H2.reshape(r, -1).T
    J1 = jet1.fields[(slice(None),) + in1].reshape(len(jet1.keys), -1).T
    J2 = jet2.fields[(slice(None),) + in2].reshape(len(jet2.keys), -1).T
    scale = np.maximum(np.abs(H2).max(axis=0) - np.abs(H2).min(axis=0), 1e-9)
    worst = 0.0
    worst_match = 0.0
    step = max(1, H1.shape[0] // 512)
    for p in range(0, H1.shape[0], step):
        dist = np.linalg.norm((H2 - H1[p]) / scale, axis=1)
        q = int(np.argmin(dist))
        worst_match = max(worst_match, float(dist[q]))
        worst = max(worst, float(np.max(np.abs(J2[q] - J1[p]))))
    if worst_match > 0.5:
        return EquivalenceVerdict(None, "sigma inversion ill-conditioned "
                                        "(unmatched invariant values)")
    return EquivalenceVerdict(bool(worst <= tol), "jet comparison through "
                              "sigma", worst, keys)


# ---------------------------------------------------------------------------
# free-field surrogate


def osculating_rank(fields: list, chart: Chart, point: tuple | None = None,
                    threshold: float = RANK_THRESHOLD):
    """Rank of the first+second derivative family of the map defined by the
    fields; maximal value is min(n_fields, m(m+3)/2)."""
    point = point or tuple(n // 2 for n in chart.res)
    m = chart.dim
    vecs = []
    for f in fields:
        parts = _grad(f, chart)
        row = [parts[a][point] for a in range(m)]
        for a in range(m):
            second = _grad(parts[a], chart)
            row += [second[b][point] for b in range(a, m)]
        vecs.append(row)
    M = np.array(vecs)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > threshold * max(float(sv[0]), 1e-300)))
    return rank, min(len(fields), m * (m + 3) // 2)


def ensure_free(fields: list, chart: Chart, rng=None, amplitude: float = 1e-6):
    """Perturb fields by a small quadratic polynomial until the osculating
    rank is maximal (numerical stand-in for the freedom homotopy)."""
    rng = rng or np.random.default_rng(0)
    fields = [np.asarray(f, dtype=float).copy() for f in fields]
    grids = chart.grids()
    for _ in range(5):
        rank, maximal = osculating_rank(fields, chart)
        if rank == maximal:
            return fields, rank
        for i in range(len(fields)):
            poly = sum(rng.normal() * g for g in grids)
            poly = poly + sum(rng.normal() * g1 * g2 for g1 in grids
                              for g2 in grids)
            fields[i] = fields[i] + amplitude * poly
    raise CoframeError("could not reach maximal osculating rank")


def torsion_to_csv(path, T: TorsionTensor, max_rows: int = 200000) -> None:
    d = T.gamma.shape[0]
    center = tuple(n // 2 for n in T.chart.shape)
    rows = []
    for i in range(d):
        for m in range(d):
            for s in range(m + 1, d):
                if T.absorbed_mask[m, s]:
                    continue
                rows.append([i, m, s, float(T.gamma[(i, m, s) + center])])
    write_csv(path, ["i", "m", "s", "gamma_at_center"], rows[:max_rows])
