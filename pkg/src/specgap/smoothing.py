"""Deep smoothing operators in the Nash-Gromov style.

A base bump profile S supported in the unit ball is rescaled to
S_zeta(x) = zeta^d S(zeta x) and combined into

    S_deep = sum_m a_m S_{zeta_m},

where the weights solve sum a_m = 1 (normalization) and
sum a_m zeta_m^{-j} = 0 for j = 1..depth (moment annihilation for all
homogeneous polynomials of degrees 1..depth).  Smoothing is discrete
convolution with even reflection at the chart boundary, which preserves
constants exactly and does not enlarge supports beyond the kernel radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve


class KernelSelectionError(RuntimeError):
    pass


def bump_profile(r):
    """exp(-1/(1-r^2)) on r < 1, zero outside (not normalized)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def deep_kernel_coefficients(scales, depth: int) -> np.ndarray:
    """Weights a_0..a_depth from the Vandermonde-type system.

    Row 0: sum a_m = 1; rows j = 1..depth: sum a_m zeta_m^{-j} = 0.
    """
    z = np.asarray(scales, dtype=float)
    if len(z) != depth + 1:
        raise ValueError("need depth+1 scales")
    if len(np.unique(z)) != len(z):
        raise np.linalg.LinAlgError("repeated scales give a singular system")
    if np.any(z < 1.0) or np.any(np.diff(z) <= 0):
        raise ValueError("scales must be >= 1 and strictly increasing")
    V = np.vander(1.0 / z, depth + 1, increasing=True).T   # row j: z^{-j}
    rhs = np.zeros(depth + 1)
    rhs[0] = 1.0
    a = np.linalg.solve(V, rhs)
    if np.max(np.abs(V @ a - rhs)) > 1e-12:
        raise np.linalg.LinAlgError("depth system residual too large")
    return a


@dataclass
class DeepKernel:
    """Composite smoothing kernel of given depth on R^dim."""

    scales: np.ndarray
    weights: np.ndarray
    depth: int
    dim: int
    profile: str = "bump"

    @classmethod
    def build(cls, dim: int, depth: int, zeta0: float = 1.0,
              ladder: float = 2.0) -> "DeepKernel":
        scales = zeta0 * ladder ** np.arange(depth + 1)
        return cls(scales=np.asarray(scales, dtype=float),
                   weights=deep_kernel_coefficients(scales, depth),
                   depth=depth, dim=dim)

    @property
    def support_radius(self) -> float:
        return 1.0 / float(self.scales[0])

    def component_samples(self, spacing: float, m: int) -> np.ndarray:
        """Sampled S_{zeta_m} on the grid lattice, discretely normalized."""
        zeta = self.scales[m]
        rad = 1.0 / zeta
        n = int(np.floor(rad / spacing))
        ax = np.arange(-n, n + 1) * spacing
        grids = np.meshgrid(*([ax] * self.dim), indexing="ij")
        r = np.sqrt(sum(g ** 2 for g in grids)) * zeta
        K = bump_profile(r)
        tot = K.sum()
        if tot <= 0:
            raise ValueError("kernel support below grid resolution")
        return K / tot

    def samples(self, spacing: float) -> np.ndarray:
        """Composite kernel on the grid lattice; discrete sum is exactly 1."""
        comps = [self.component_samples(spacing, m)
                 for m in range(self.depth + 1)]
        n = max(c.shape[0] for c in comps)
        out = np.zeros((n,) * self.dim)
        for a, c in zip(self.weights, comps):
            pad = (n - c.shape[0]) // 2
            sl = tuple(slice(pad, pad + c.shape[0]) for _ in range(self.dim))
            out[sl] += a * c
        return out

    def manifest(self) -> str:
        return "\n".join([
            "profile %s" % self.profile,
            "dim %d" % self.dim,
            "depth %d" % self.depth,
            "scales " + " ".join("%.17g" % z for z in self.scales),
            "weights " + " ".join("%.17g" % w for w in self.weights),
        ]) + "\n"


def smooth(field: np.ndarray, kernel: DeepKernel, chart) -> np.ndarray:
    """Discrete convolution with even reflection past the chart boundary."""
    f = np.asarray(field, dtype=float)
    if f.ndim != kernel.dim:
        raise ValueError("field dimension does not match kernel")
    K = kernel.samples(chart.spacing(0))
    for i in range(chart.dim):
        if abs(chart.spacing(i) - chart.spacing(0)) > 1e-12 * chart.spacing(0):
            raise ValueError("smoothing requires uniform spacing across axes")
        if K.shape[i] > 2 * f.shape[i]:
            raise ValueError("chart smaller than kernel support")
    pad = [(s // 2, s // 2) for s in K.shape]
    fp = np.pad(f, pad, mode="reflect")
    out = fftconvolve(fp, K, mode="valid")
    if out.shape != f.shape:
        raise AssertionError("convolution shape bookkeeping failed")
    return out


def verify_depth(kernel: DeepKernel, max_degree: int,
                 quad_points: int = 1201) -> np.ndarray:
    """Numerically integrated monomial moments of the composite kernel.

    Each component S_{zeta_m} is integrated on its own support-fitted grid
    (uniform relative accuracy across scales) and the composite moment is
    assembled by linearity.  Residual r_j is the worst |alpha| = j moment,
    normalized by the total mass sum |a_m|; construction makes r_j tiny for
    j <= depth and generically nonzero beyond.
    """
    if kernel.dim > 2:
        quad_points = min(quad_points, 161)
    residuals = np.zeros(max_degree)
    moments = {}
    for m, (a, zeta) in enumerate(zip(kernel.weights, kernel.scales)):
        rad = 1.0 / zeta
        ax = np.linspace(-rad, rad, quad_points)
        h = ax[1] - ax[0]
        grids = np.meshgrid(*([ax] * kernel.dim), indexing="ij")
        base = bump_profile(np.sqrt(sum(g ** 2 for g in grids)) * zeta)
        base /= base.sum() * h ** kernel.dim
        for deg in range(1, max_degree + 1):
            for alpha in _multi_indices(kernel.dim, deg):
                mono = np.ones_like(base)
                for g, p in zip(grids, alpha):
                    if p:
                        mono = mono * g ** p
                moments.setdefault(alpha, np.zeros(len(kernel.weights)))
                moments[alpha][m] = float(np.sum(base * mono)) * h ** kernel.dim
    wsum = float(np.sum(np.abs(kernel.weights)))
    for deg in range(1, max_degree + 1):
        worst = max(abs(float(np.dot(kernel.weights, moments[alpha])))
                    for alpha in _multi_indices(kernel.dim, deg))
        residuals[deg - 1] = worst / wsum
    return residuals


def _multi_indices(dim: int, total: int):
    if dim == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _multi_indices(dim - 1, total - head):
            yield (head,) + rest


def select_kernel(kernels, kappa: np.ndarray, locus_points, chart,
                  root_tol: float = 1e-8):
    """First candidate (by increasing support radius) whose smoothed kappa
    keeps |sin(S*kappa)| <= root_tol at locus grid points and preserves
    Hessian nondegeneracy of cos(kappa) wherever the raw field had it.

    locus_points: sequence of grid index tuples on the loci.
    """
    if not kernels:
        raise KernelSelectionError("empty candidate list")
    diagnostics = []
    hess_ref = _hessdet(np.cos(kappa), chart)
    scale_ref = float(np.max(np.abs(hess_ref))) or 1.0
    pos_ref = hess_ref > 1e-8 * scale_ref
    inner = chart.interior()
    for kern in sorted(kernels, key=lambda k: k.support_radius):
        sk = smooth(kappa, kern, chart)
        crit1 = max((abs(float(np.sin(sk[pt]))) for pt in locus_points),
                    default=0.0)
        ok1 = crit1 <= root_tol
        hd = _hessdet(np.cos(sk), chart)
        floor = 1e-12 * max(float(np.max(np.abs(hd))), 1e-300)
        mask = np.zeros_like(pos_ref)
        mask[inner] = True
        viol = pos_ref & mask & (np.abs(hd) <= floor)
        ok2 = not np.any(viol)
        diagnostics.append((kern.support_radius, crit1, ok1, ok2))
        if ok1 and ok2:
            return kern
    raise KernelSelectionError(
        "no kernel qualifies; per-candidate (radius, locus residual, "
        "crit1, crit2): %r" % diagnostics)


def _hessdet(field: np.ndarray, chart) -> np.ndarray:
    spac = [chart.spacing(i) for i in range(chart.dim)]
    g = np.gradient(field, *spac, edge_order=2)
    if chart.dim == 1:
        return np.gradient(g[0], spac[0], edge_order=2)
    H = np.empty(field.shape + (chart.dim, chart.dim))
    for i in range(chart.dim):
        gi = np.gradient(g[i], *spac, edge_order=2)
        for j in range(chart.dim):
            H[..., i, j] = gi[j]
    return np.linalg.det(H)
