"""Finite-genus spectral curves, period matrices, theta functions.

The truncated curve keeps the m widest open gaps of a periodic spectrum:
branch points are the 2m+1 band edges bounding them, and the curve is
y^2 = -prod (lam - e_i), positive on gaps.  A-cycles loop around gaps,
B-cycles pass through the bands to the infinite gap; on the upper side of
the real axis the root y picks up a quarter turn per branch point passed,
so every cycle integral reduces to phase-weighted real segment integrals
between consecutive branch points.  Square-root endpoint singularities are
removed by the cosine substitution lam = mid + half*cos(theta)
(Chebyshev-Gauss nodes).

Conventions recorded in the manifest: A_i encircles gap i; B_i runs through
the bands between e_0 and gap i (intermediate gap segments cancel on the
closed contour); the global sheet sign is fixed by Im R positive definite,
with one automatic retry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gridfield import write_csv


class CurveError(RuntimeError):
    pass


class ReconstructionSingular(RuntimeError):
    pass


@dataclass
class CurveModel:
    """Hyperelliptic spectral curve with real branch points.

    branch_points has odd length 2m+1 (one branch point at infinity) for
    spectrum-derived curves; even length 2m+2 is accepted for synthetic
    configurations.  Gaps are [e_{2i-1}, e_{2i}], bands the complementary
    segments.
    """

    branch_points: np.ndarray
    genus: int
    fingerprint: str = ""

    def __post_init__(self):
        e = np.sort(np.asarray(self.branch_points, dtype=float))
        if len(e) < 3:
            raise CurveError("need at least 3 branch points")
        if np.any(np.diff(e) <= 0):
            raise CurveError("branch points must be strictly increasing")
        object.__setattr__(self, "branch_points", e)
        m = (len(e) - 1) // 2
        if self.genus != m:
            raise CurveError("genus inconsistent with branch point count")

    @property
    def gaps(self) -> list:
        e = self.branch_points
        return [(e[2 * i - 1], e[2 * i]) for i in range(1, self.genus + 1)]

    @property
    def bands(self) -> list:
        e = self.branch_points
        return [(e[2 * i], e[2 * i + 1]) for i in range(self.genus)]

    def manifest(self) -> str:
        lines = ["genus %d" % self.genus,
                 "branch_points " + " ".join("%.17g" % e for e in self.branch_points),
                 "cycles A around gaps, B through bands from e0",
                 "sheet Im(R) positive definite",
                 "fingerprint %s" % self.fingerprint]
        return "\n".join(lines) + "\n"


@dataclass
class PeriodMatrix:
    """Riemann period matrix of B-periods in the A-normalized basis."""

    mat: np.ndarray
    m: int
    fingerprint: str = ""

    @property
    def is_zero(self) -> bool:
        return self.m == 0 or not np.any(self.mat)

    def check(self, tol: float = 1e-8):
        if self.is_zero:
            return
        sym = np.max(np.abs(self.mat - self.mat.T))
        if sym > tol:
            raise CurveError("period matrix asymmetric: %g" % sym)
        if np.linalg.eigvalsh(self.mat.imag).min() <= 0:
            raise CurveError("Im(period matrix) not positive definite")


def zero_period_matrix(fingerprint: str = "") -> PeriodMatrix:
    """Degenerate all-gaps-closed convention: the zero matrix."""
    return PeriodMatrix(mat=np.zeros((0, 0), dtype=complex), m=0,
                        fingerprint=fingerprint)


def truncate_curve(bundle, m: int, fingerprint: str = "",
                   width_floor_scale: float = 1e-9) -> CurveModel | None:
    """Curve retaining the m widest open gaps of a SpectrumBundle.

    Fewer than m open gaps produce a lower-genus curve; none produce None
    (zero-matrix convention downstream).
    """
    lams = bundle.lams
    widths = bundle.gap_widths()
    scales = np.array([1.0 + abs(lams[2 * i]) for i in range(1, len(widths) + 1)])
    open_idx = [i + 1 for i in range(len(widths))
                if widths[i] > width_floor_scale * scales[i]
                and not bundle.double_flags[i]]
    keep = sorted(sorted(open_idx, key=lambda i: -widths[i - 1])[:m])
    if not keep:
        return None
    pts = [lams[0]]
    for i in keep:
        pts += [lams[2 * i - 1], lams[2 * i]]
    return CurveModel(branch_points=np.array(pts), genus=len(keep),
                      fingerprint=fingerprint)


# ---------------------------------------------------------------------------
# cycle integrals


def _segment_integrals(E: np.ndarray, a: float, b: float, powers,
                       nodes: int = 128) -> np.ndarray:
    """I[p] = int_a^b lam^p / sqrt(|prod (lam - e)|) dlam for consecutive
    branch points a < b, endpoint singularities removed by the cosine rule."""
    k = np.arange(nodes)
    lam = 0.5 * (a + b) + 0.5 * (b - a) * np.cos(np.pi * (k + 0.5) / nodes)
    rest = np.ones_like(lam)
    for e in E:
        if abs(e - a) > 1e-13 * (1.0 + abs(a)) and abs(e - b) > 1e-13 * (1.0 + abs(b)):
            rest *= np.abs(lam - e)
    w = np.pi / nodes / np.sqrt(rest)
    return np.array([np.sum(lam ** p * w) for p in powers])


def _upper_phase(nbp: int, seg: int, odd: bool) -> complex:
    """Phase of y on the upper side of segment [e_seg, e_{seg+1}]."""
    n_right = nbp - (seg + 1)
    ph = 1j ** n_right
    if odd:
        ph = ph * 1j   # leading minus sign of y^2 = -prod for odd curves
    return ph


def a_periods(curve: CurveModel, nodes: int = 128) -> np.ndarray:
    """Matrix A[i, p] of A-cycle periods of lam^p dlam / y (real)."""
    E = curve.branch_points
    m = curve.genus
    odd = len(E) % 2 == 1
    powers = list(range(m))
    A = np.zeros((m, m), dtype=complex)
    for i, (a, b) in enumerate(curve.gaps):
        seg = 2 * i + 1
        J = _segment_integrals(E, a, b, powers, nodes)
        A[i, :] = 2.0 * J / _upper_phase(len(E), seg, odd)
    if np.max(np.abs(A.imag)) > 1e-10 * max(1.0, np.max(np.abs(A.real))):
        raise CurveError("A-periods not real; phase bookkeeping broken")
    return A.real


def normalized_basis(curve: CurveModel, nodes: int = 128):
    """Coefficients c[:, j] of the normalized differentials
    phi_j = sum_l c[l, j] lam^l with A_i(phi_j) = delta_ij.

    Returns (coef, condition_number)."""
    A = a_periods(curve, nodes)
    cond = float(np.linalg.cond(A))
    if cond > 1e12:
        import warnings
        warnings.warn("A-period system ill-conditioned: cond=%.3g" % cond)
    return np.linalg.inv(A), cond


def b_periods(curve: CurveModel, coef: np.ndarray | None = None,
              nodes: int = 128) -> PeriodMatrix:
    """Riemann period matrix R[i, j] = B_i(phi_j).

    The b_i contour crosses bands 0..i-1 (each contributing twice the upper
    segment integral, imaginary phase); intermediate gap segments cancel.
    Sheet sign fixed by Im R > 0 with one retry.
    """
    E = curve.branch_points
    m = curve.genus
    odd = len(E) % 2 == 1
    powers = list(range(m))
    if coef is None:
        coef, _ = normalized_basis(curve, nodes)
    R = np.zeros((m, m), dtype=complex)
    for i in range(1, m + 1):
        acc = np.zeros(m, dtype=complex)
        for bidx in range(i):
            a, b = curve.bands[bidx]
            seg = 2 * bidx
            J = _segment_integrals(E, a, b, powers, nodes)
            acc = acc + 2.0 * J / _upper_phase(len(E), seg, odd)
        R[i - 1, :] = acc @ coef
    pm = PeriodMatrix(mat=R, m=m, fingerprint=curve.fingerprint)
    if m and np.linalg.eigvalsh(R.imag).min() <= 0:
        pm = PeriodMatrix(mat=-R, m=m, fingerprint=curve.fingerprint)
        if np.linalg.eigvalsh(pm.mat.imag).min() <= 0:
            raise CurveError("Im(R) indefinite under both sheet signs")
    return pm


def period_matrix(curve: CurveModel | None, nodes: int = 128) -> PeriodMatrix:
    if curve is None:
        return zero_period_matrix()
    return b_periods(curve, nodes=nodes)


# ---------------------------------------------------------------------------
# theta functions


def theta(z, R: PeriodMatrix, radius: int = 20):
    """Riemann theta sum over integer vectors with |n|_inf <= radius.

    theta(z) = sum_n exp(pi i n.R n + 2 pi i n.z).  Returns (value,
    tail_bound) with the tail estimated from the smallest eigenvalue of
    Im R.  Satisfies theta(z + e_j) = theta(z) and
    theta(z + R e_j) = exp(-2 pi i (z_j + R_jj/2)) theta(z).
    """
    if radius < 1:
        raise ValueError("radius >= 1 required")
    if R.is_zero:
        return complex(1.0), 0.0
    lam_min = np.linalg.eigvalsh(R.mat.imag).min()
    if lam_min <= 0:
        raise CurveError("Im(R) not positive definite")
    m = R.m
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    rng = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([rng] * m), indexing="ij")
    N = np.stack([g.ravel() for g in grids], axis=1)
    quad = np.einsum("ni,ij,nj->n", N, R.mat, N)
    val = complex(np.sum(np.exp(1j * np.pi * quad + 2j * np.pi * (N @ z))))
    # crude tail: all n with |n|_inf = radius+1 dominate the remainder
    r1 = radius + 1
    tail = ((2 * r1 + 1) ** m - (2 * r1 - 1) ** m) * np.exp(
        -np.pi * lam_min * r1 ** 2 + 2 * np.pi * r1 * m * np.max(np.abs(z.imag)))
    return val, float(tail)


def theta_grid(zs: np.ndarray, R: PeriodMatrix, radius: int = 20) -> np.ndarray:
    """Vectorized theta over an array of argument vectors (shape (npts, m))."""
    m = R.m
    rng = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([rng] * m), indexing="ij")
    N = np.stack([g.ravel() for g in grids], axis=1)
    quad = np.exp(1j * np.pi * np.einsum("ni,ij,nj->n", N, R.mat, N))
    return (np.exp(2j * np.pi * zs @ N.T) * quad[None, :]).sum(axis=1)


def its_matveev_reconstruct(curve: CurveModel, phi_offset=None,
                            n_xi: int = 512, radius: int = 24,
                            lam0_target: float | None = None):
    """Finite-gap potential q(xi) = -2 d^2/dxi^2 log theta(phi* + xi v) + c.

    v is the integer wave vector (1, ..., m) induced by the gap integrals of
    the normalized differentials, so q has unit period exactly.  The
    additive constant c matches lam_0 of the reconstructed spectrum to the
    curve's lowest branch point (or lam0_target).  Genus <= 2 supported.
    """
    m = curve.genus
    if m > 2:
        raise CurveError("reconstruction supported for genus <= 2")
    if n_xi < 256:
        raise ValueError("xi grid must have >= 256 points")
    R = b_periods(curve)
    v = np.arange(1, m + 1, dtype=float)
    phi = np.zeros(m, dtype=complex) if phi_offset is None else np.asarray(phi_offset, dtype=complex)
    xi = np.arange(n_xi) / n_xi
    zs = phi[None, :] + xi[:, None] * v[None, :]
    th = theta_grid(zs, R, radius)
    if np.min(np.abs(th)) < 1e-10 * np.max(np.abs(th)):
        raise ReconstructionSingular("theta vanishes on the real xi line")
    logt = np.log(th)
    h = 1.0 / n_xi
    d2 = (-np.roll(logt, 2) + 16 * np.roll(logt, 1) - 30 * logt
          + 16 * np.roll(logt, -1) - np.roll(logt, -2)) / (12 * h * h)
    q = (-2.0 * d2).real
    if np.max(np.abs((-2.0 * d2).imag)) > 1e-6 * (1 + np.max(np.abs(q))):
        raise ReconstructionSingular("reconstruction not real on the xi line")
    # additive constant from the lowest eigenvalue
    from . import fourier_oracle
    lam = fourier_oracle.periodic_spectrum_fourier(q, 1, dim=48)
    target = curve.branch_points[0] if lam0_target is None else lam0_target
    return q + (target - lam[0]), xi


def compare_invariants(set1, set2, tol: float) -> tuple:
    """Entrywise comparison of two period-matrix collections.

    Zero matrices (degenerate convention) compare equal only to zero.
    Returns (equal, max_deviation).
    """
    if len(set1) != len(set2):
        raise CurveError("period matrix sets differ in length")
    worst = 0.0
    for P1, P2 in zip(set1, set2):
        if P1.is_zero != P2.is_zero:
            return False, float("inf")
        if P1.is_zero:
            continue
        if P1.mat.shape != P2.mat.shape:
            raise CurveError("period matrix shape mismatch")
        worst = max(worst, float(np.max(np.abs(P1.mat - P2.mat))))
    return worst <= tol, worst


def period_matrices_to_csv(path, entries) -> None:
    """entries: list of (coords tuple, PeriodMatrix), row-major entries."""
    entries = list(entries)
    if not entries:
        write_csv(path, ["m"], [])
        return
    ncoord = len(entries[0][0])
    mmax = max(pm.m for _, pm in entries)
    header = ["c%d" % i for i in range(ncoord)] + ["m"]
    for i in range(mmax):
        for j in range(mmax):
            header += ["re_%d%d" % (i, j), "im_%d%d" % (i, j)]
    rows = []
    for coords, pm in entries:
        row = [float(c) for c in coords] + [pm.m]
        flat = np.zeros((mmax, mmax), dtype=complex)
        if pm.m:
            flat[:pm.m, :pm.m] = pm.mat
        for v in flat.ravel():
            row += [float(v.real) + 0.0, float(v.imag) + 0.0]
        rows.append(row)
    write_csv(path, header, rows)
