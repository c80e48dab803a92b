"""Collapse oscillator test and the evaporation operator algebra.

The no-go side simulates u'' + 2 F(t) u' + u = 0 for the second time
derivative of the discriminant, extracts the amplitude envelope, inverts it
to a damping-versus-amplitude table near t = 0, and compares polynomial
signatures of that table between candidate and reference trajectories.

The evaporation side represents absorption/emission operators on the
truncated band-edge vector by Hermitian matrices built from a Gaussian
kernel family.  Absorption must strictly widen every gap and emission
strictly narrow it; raw actions violating the law are projected onto the
admissible cone and the projection logged.  Chronological products reject
mixed kinds and sub-Planck spacing, and invert under the substitution
E(t_m) -> A(t_{n-m}) when the operators are built as mutually inverse
pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .gridfield import write_csv

PLANCK_SPACING = 1e-3   # abstract time units


class DynamicsError(RuntimeError):
    pass


class KindViolation(ValueError):
    pass


# ---------------------------------------------------------------------------
# oscillator


@dataclass
class CollapseTrajectory:
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    envelope_t: np.ndarray | None = None
    envelope: np.ndarray | None = None


def simulate_collapse(F, u0: float, du0: float, dt: float,
                      t_max: float) -> CollapseTrajectory:
    """Integrate u'' + 2 F(t) u' + u = 0 on [0, t_max] with output step dt."""
    if dt > 1e-3 * t_max:
        raise ValueError("dt must be <= 1e-3 * t_max")

    def rhs(t, y):
        return (y[1], -2.0 * F(t) * y[1] - y[0])

    ts = np.arange(0.0, t_max + 0.5 * dt, dt)
    sol = solve_ivp(rhs, (0.0, ts[-1]), (u0, du0), method="DOP853",
                    rtol=1e-11, atol=1e-13, t_eval=ts)
    if not sol.success:
        raise DynamicsError("oscillator integration failed")
    return CollapseTrajectory(t=sol.t, u=sol.y[0], du=sol.y[1])


def energy(traj: CollapseTrajectory) -> np.ndarray:
    return 0.5 * (traj.du ** 2 + traj.u ** 2)


def fit_damping(traj: CollapseTrajectory, n_table: int = 24,
                rel_floor: float = 1e-2, min_sep: float = 0.5):
    """Envelope extraction and inversion to an (amplitude, damping) table.

    Peaks of |u| are interpolated into an envelope A(t); each adjacent-peak
    interval gives a local damping estimate F_hat = -(d/dt) log A; the
    table covers the initial monotone segment of A.  Peaks below rel_floor
    of the global maximum or closer than min_sep to the previous peak are
    treated as noise.  Requires several oscillation periods of data.
    """
    u = traj.u
    t = traj.t
    peaks_t, peaks_a = [], []
    au = np.abs(u)
    floor = rel_floor * float(au.max())
    if au[0] >= au[1] and au[0] > floor:
        peaks_t.append(t[0])
        peaks_a.append(au[0])
    for i in range(1, len(u) - 1):
        if au[i] >= au[i - 1] and au[i] >= au[i + 1] and au[i] > floor:
            if peaks_t and t[i] - peaks_t[-1] < min_sep:
                continue
            # parabolic refinement of the extremum
            denom = au[i - 1] - 2 * au[i] + au[i + 1]
            shift = 0.5 * (au[i - 1] - au[i + 1]) / denom if denom != 0 else 0.0
            ti = t[i] + shift * (t[1] - t[0])
            ai = au[i] - 0.25 * (au[i - 1] - au[i + 1]) * shift
            peaks_t.append(ti)
            peaks_a.append(ai)
    if len(peaks_t) < 4:
        raise DynamicsError("trajectory too short for envelope extraction: "
                            "need several oscillation periods")
    pt = np.array(peaks_t)
    pa = np.array(peaks_a)
    traj.envelope_t, traj.envelope = pt, pa
    # initial monotone (non-increasing) segment
    end = len(pa)
    for i in range(1, len(pa)):
        if pa[i] > pa[i - 1] * (1 + 1e-9):
            end = i
            break
    if end < 3:
        raise DynamicsError("initial envelope not monotone; inversion "
                            "domain empty")
    pt, pa = pt[:end], pa[:end]
    loga = np.log(pa)
    # each adjacent-peak interval yields one local estimate
    # F_hat = -(d/dt) log A, attributed to the interval midpoint with the
    # geometric-mean amplitude
    table = []
    for i in range(len(pt) - 1):
        fhat = -(loga[i + 1] - loga[i]) / (pt[i + 1] - pt[i])
        table.append((np.sqrt(pa[i] * pa[i + 1]), fhat,
                      0.5 * (pt[i] + pt[i + 1])))
    table = table[:n_table]
    return np.array(table)


def damping_at_zero(table: np.ndarray) -> float:
    """Extrapolate F_hat to t = 0 from the first table entries."""
    ts = table[:, 2]
    fs = table[:, 1]
    if len(ts) >= 3:
        c = np.polyfit(ts[:4], fs[:4], 1)
        return float(np.polyval(c, 0.0))
    return float(fs[0])


def polynomial_signature(table: np.ndarray, degree: int = 2) -> np.ndarray:
    """Least-squares polynomial coefficients of F as a function of the
    amplitude (constant term first)."""
    if degree > 3:
        raise ValueError("degree <= 3 supported")
    if len(table) < degree + 1:
        raise DynamicsError("table shorter than degree + 1: underdetermined")
    A = table[:, 0]
    Fv = table[:, 1]
    coef = np.polyfit(A, Fv, degree)
    return coef[::-1]


def no_go_test(candidate_sig: np.ndarray, reference_sig: np.ndarray,
               tols=None):
    """Accept/reject by per-degree comparison of signature coefficients.

    Returns (accepted, message)."""
    if len(candidate_sig) != len(reference_sig):
        return False, "signature degree mismatch"
    if tols is None:
        tols = [0.05 * max(1.0, abs(reference_sig[0]))] + \
               [0.5 * max(1.0, abs(c)) for c in reference_sig[1:]]
    for d, (c, r, tol) in enumerate(zip(candidate_sig, reference_sig, tols)):
        if abs(c - r) > tol:
            return False, ("signature mismatch at degree %d: %.6g vs %.6g "
                           "(tol %.3g)" % (d, c, r, tol))
    return True, "signatures agree"


# ---------------------------------------------------------------------------
# spectral states and evaporation operators


@dataclass
class SpectralState:
    """Truncated band-edge vector (lam_0, ..., lam_2n) with validity flags."""

    edges: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if len(self.edges) % 2 == 0:
            raise ValueError("band-edge vector must have odd length 2n+1")

    @property
    def n_gaps(self) -> int:
        return (len(self.edges) - 1) // 2

    def gap_widths(self) -> np.ndarray:
        return np.array([self.edges[2 * i] - self.edges[2 * i - 1]
                         for i in range(1, self.n_gaps + 1)])

    def validity_flags(self) -> np.ndarray:
        """False marks unphysical gaps (lam_{2i-1} > lam_{2i}): those carry
        no geometrical content and are excluded downstream."""
        return self.gap_widths() >= 0.0


@dataclass
class EvaporationOperator:
    kind: str                  # "A" (absorption) or "E" (emission)
    t: float
    H: np.ndarray
    kernel: dict = field(default_factory=dict)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if np.max(np.abs(H - H.T)) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValueError("operator matrix must be Hermitian")
        eig = np.linalg.eigvalsh(H)
        if np.min(np.abs(eig)) <= 1e-10:
            raise ValueError("operator matrix must be invertible")
        if self.kind not in ("A", "E"):
            raise KindViolation("kind must be 'A' or 'E'")
        self.H = H


def gaussian_kernel_matrix(dim: int, sigma: float, strength: float,
                           seed: int | None = None) -> np.ndarray:
    """Symmetric Gaussian-bump kernel discretized on the edge indices."""
    idx = np.arange(dim)
    K = np.exp(-0.5 * ((idx[:, None] - idx[None, :]) / sigma) ** 2)
    if seed is not None:
        rng = np.random.default_rng(seed)
        P = rng.normal(size=(dim, dim))
        K = K + 0.1 * (P + P.T) * np.exp(
            -0.25 * ((idx[:, None] - idx[None, :]) / sigma) ** 2)
    return strength * K


def make_operator(kind: str, t: float, dim: int, sigma: float = 2.0,
                  strength: float = 0.05, seed: int | None = None,
                  inverse_of: "EvaporationOperator | None" = None
                  ) -> EvaporationOperator:
    """Absorption widens, emission narrows; the matrix is I + eta K for
    absorption and its inverse family for emission.

    inverse_of builds the exact matrix inverse (mutually inverse pair for
    the substitution-inverse check).
    """
    if inverse_of is not None:
        H = np.linalg.inv(inverse_of.H)
        kind = "A" if inverse_of.kind == "E" else "E"
        return EvaporationOperator(kind=kind, t=t, H=H,
                                   kernel={"inverse_of": inverse_of.t})
    K = gaussian_kernel_matrix(dim, sigma, strength, seed)
    nrm = np.max(np.abs(np.linalg.eigvalsh(K)))
    if nrm >= 0.9:
        K = K * (0.5 / nrm)
    if kind == "A":
        H = np.eye(dim) + K
    elif kind == "E":
        H = np.linalg.inv(np.eye(dim) + K)
    else:
        raise KindViolation("kind must be 'A' or 'E'")
    return EvaporationOperator(kind=kind, t=t, H=H,
                               kernel={"sigma": sigma, "strength": strength,
                                       "seed": seed})


MIN_GAP_CHANGE = 1e-9     # relative strict-inequality margin
MAX_GAP_FACTOR = 1.5      # per-application stretch bound (absorption)
MIN_GAP_FACTOR = 0.5      # per-application shrink bound (emission)
CLOSURE_SCALE = 1e-12     # widths below this scale snap to closure


def apply(op: EvaporationOperator, state: SpectralState,
          log: list | None = None) -> SpectralState:
    """Act on the band-edge vector and enforce the strict gap law.

    Absorption makes every gap strictly wider, emission strictly narrower;
    the admissible cone also bounds the per-application stretch/shrink
    factor, so emission approaches the closure threshold geometrically
    rather than slamming gaps shut.  Raw actions outside the cone are
    projected onto it and each projection is logged.  The identity action
    satisfies neither law (kind violation).
    """
    raw = op.H @ state.edges
    if np.allclose(raw, state.edges, rtol=0.0, atol=1e-15):
        raise KindViolation("identity action changes no gap; neither "
                            "absorption nor emission")
    old_w = state.gap_widths()
    n = state.n_gaps
    mids = np.array([0.5 * (raw[2 * i] + raw[2 * i - 1])
                     for i in range(1, n + 1)])
    new_w = np.array([raw[2 * i] - raw[2 * i - 1] for i in range(1, n + 1)])
    scale = 1.0 + np.abs(old_w)
    for i in range(n):
        if old_w[i] <= 0.0 and op.kind == "E":
            target = 0.0            # closed gaps stay closed
        else:
            delta = MIN_GAP_CHANGE * scale[i]
            if op.kind == "A":
                lo = old_w[i] + delta
                hi = max(old_w[i] * MAX_GAP_FACTOR, lo + delta)
            else:
                hi = max(old_w[i] - delta, 0.0)
                lo = min(old_w[i] * MIN_GAP_FACTOR, hi)
            target = min(max(new_w[i], lo), hi)
        if target != new_w[i] and log is not None:
            log.append(("%s-projection" % op.kind, i, float(new_w[i]),
                        float(target)))
        if op.kind == "E" and target < CLOSURE_SCALE * scale[i]:
            target = 0.0            # closure threshold reached
        new_w[i] = target
    edges = [raw[0]]
    for i in range(n):
        edges += [mids[i] - 0.5 * new_w[i], mids[i] + 0.5 * new_w[i]]
    return SpectralState(np.array(edges))


def commutator(op1: EvaporationOperator, op2: EvaporationOperator):
    """Commutator matrix and its Frobenius norm."""
    if op1.H.shape != op2.H.shape:
        raise ValueError("operator dimension mismatch")
    C = op1.H @ op2.H - op2.H @ op1.H
    return C, float(np.linalg.norm(C, "fro"))


@dataclass
class ChronologicalProduct:
    ops: list
    H: np.ndarray
    kinds: str


def chronological_product(ops, planck: float = PLANCK_SPACING
                          ) -> ChronologicalProduct:
    """Time-ordered composition; rejects mixed kinds (negative-energy
    configurations) and time steps below the Planck spacing."""
    if not ops:
        raise ValueError("empty product")
    kinds = {op.kind for op in ops}
    if len(kinds) > 1:
        raise KindViolation("mixed chronological products are rejected")
    times = [op.t for op in ops]
    if any(t2 - t1 < planck for t1, t2 in zip(times, times[1:])):
        raise ValueError("time spacing below the Planck lower bound")
    H = np.eye(ops[0].H.shape[0])
    for op in ops:         # later times act later (left)
        H = op.H @ H
    return ChronologicalProduct(ops=list(ops), H=H, kinds=kinds.pop())


def substitution_inverse(prod: ChronologicalProduct,
                         planck: float = PLANCK_SPACING) -> ChronologicalProduct:
    """The inverse product under E(t_m) -> A(t_{n-m}) for operators built as
    mutually inverse pairs."""
    n = len(prod.ops)
    t0 = prod.ops[0].t
    new_ops = []
    for m, op in enumerate(reversed(prod.ops)):
        new_ops.append(make_operator("ignored", t0 + (n + m) * max(
            planck, 1e-3), dim=op.H.shape[0], inverse_of=op))
    return chronological_product(new_ops, planck)


# ---------------------------------------------------------------------------
# discriminant factorization


def factorize_discriminant(lams: np.ndarray, lam_grid: np.ndarray,
                           disc_fn) -> dict:
    """Truncated factor arrays star_plus/star_minus over a lambda grid.

    star_plus carries the even-indexed eigenvalue factors, star_minus the
    odd ones, both in the normalized form (1 - lam/lam_i) (raw (lam_i - lam)
    for eigenvalues at zero), with a common scalar prefactor sqrt(v) fitted
    so the product tracks the discriminant curve D^2 - 4 on the grid; the
    relative error and the fitted v are reported.  The branch of sqrt(v) is
    fixed by positivity of the product below lam_0 - 1.
    """
    lams = np.asarray(lams, dtype=float)
    n = (len(lams) - 1) // 2
    if n < 3:
        raise ValueError("need >= 3 gaps for the factorization")
    lam_grid = np.asarray(lam_grid, dtype=float)

    def factors(indices):
        out = np.ones_like(lam_grid)
        for i in indices:
            li = lams[i]
            if abs(li) < 1e-12:
                out = out * (li - lam_grid)
            else:
                out = out * (1.0 - lam_grid / li)
        return out

    plus = factors(range(0, 2 * n + 1, 2))
    minus = factors(range(1, 2 * n + 1, 2))
    prod = plus * minus
    target = np.array([disc_fn(l) ** 2 - 4.0 for l in lam_grid])
    denom = float(np.dot(prod, prod))
    v = float(np.dot(prod, target) / denom) if denom > 0 else 0.0
    fit = v * prod
    rel_err = float(np.max(np.abs(fit - target))
                    / max(np.max(np.abs(target)), 1e-300))
    if rel_err > 0.10:
        import warnings
        warnings.warn("factorization truncation too short: rel err %.3g"
                      % rel_err)
    # sqrt(v) branch: the signed prefactor rides on star_plus so the
    # product equals the fit; positivity below lam_0 - 1 then holds
    # whenever the truncation is adequate
    sq = np.sqrt(abs(v))
    j0 = int(np.argmin(np.abs(lam_grid - (lams[0] - 1.0))))
    if lam_grid[j0] < lams[0] and fit[j0] <= 0:
        import warnings
        warnings.warn("factor product not positive below the spectrum; "
                      "branch/truncation suspect")
    return {"star_plus": np.sign(v) * sq * plus, "star_minus": sq * minus,
            "v": v, "rel_error": rel_err, "lam_grid": lam_grid,
            "target": target}


def trajectory_to_csv(path, traj: CollapseTrajectory) -> None:
    rows = [[float(t), float(u), float(du)]
            for t, u, du in zip(traj.t, traj.u, traj.du)]
    write_csv(path, ["t", "u", "du"], rows)


def signature_manifest(path, sig: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("degree %d\n" % (len(sig) - 1))
        for d, c in enumerate(sig):
            fh.write("c%d %.17g\n" % (d, c))
