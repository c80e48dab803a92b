"""Independent oracles for the test suite.

Every oracle here is a separate computational route from the code under
test: AGM elliptic integrals for genus-1 period ratios, a Magnus-product
propagator for Hill fundamental solutions, a scalar theta lattice sum,
step-halved RK4 for the oscillator, and direct-sum convolution.  None of
them share integration or quadrature code with the package.
"""

import numpy as np


def agm(a, b):
    for _ in range(200):
        an, bn = 0.5 * (a + b), np.sqrt(a * b)
        if abs(an - bn) <= 1e-16 * abs(an):
            return an
        a, b = an, bn
    return 0.5 * (a + b)


def ellip_K(m):
    """Complete elliptic integral K with parameter m = k^2, via AGM."""
    return np.pi / (2.0 * agm(1.0, np.sqrt(1.0 - m)))


def quartic_period_ratio(e0, e1, e2, e3):
    """tau = i K(m)/K(1-m) for the curve with real branch points
    e0<e1<e2<e3, A-cycle around the gap [e1, e2], B-cycle through the band
    [e0, e1]; m is the standard cross-ratio."""
    m = ((e1 - e0) * (e3 - e2)) / ((e2 - e0) * (e3 - e1))
    return 1j * ellip_K(m) / ellip_K(1.0 - m)


def magnus_monodromy(q, lam, n_steps=4096):
    """Fundamental matrix by a midpoint-exponential (Magnus) product with
    Richardson extrapolation; independent of any Runge-Kutta code."""

    def propagate(n):
        h = 1.0 / n
        M = np.eye(2)
        for i in range(n):
            xm = (i + 0.5) * h
            c = q(xm) - lam
            # exp(h * [[0, 1], [c, 0]])
            if c > 0:
                s = np.sqrt(c)
                ch, sh = np.cosh(s * h), np.sinh(s * h)
                E = np.array([[ch, sh / s], [s * sh, ch]])
            elif c < 0:
                s = np.sqrt(-c)
                E = np.array([[np.cos(s * h), np.sin(s * h) / s],
                              [-s * np.sin(s * h), np.cos(s * h)]])
            else:
                E = np.array([[1.0, h], [0.0, 1.0]])
            M = E @ M
        return M

    M1 = propagate(n_steps)
    M2 = propagate(2 * n_steps)
    return M2 + (M2 - M1) / 3.0


def scalar_theta(z, tau, radius=60):
    """1-D theta lattice sum, direct scalar implementation."""
    total = 0.0 + 0.0j
    for n in range(-radius, radius + 1):
        total += np.exp(1j * np.pi * n * n * tau + 2j * np.pi * n * z)
    return total


def rk4_oscillator(F, u0, du0, t_max, n_steps):
    """Classical fixed-step RK4 for u'' + 2F(t)u' + u = 0."""

    def rhs(t, y):
        return np.array([y[1], -2.0 * F(t) * y[1] - y[0]])

    h = t_max / n_steps
    t = 0.0
    y = np.array([u0, du0], dtype=float)
    ts = [0.0]
    us = [u0]
    for _ in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        ts.append(t)
        us.append(y[0])
    return np.array(ts), np.array(us)


def direct_convolution(field, kernel):
    """Dense direct-sum 'same'-mode convolution with reflect padding,
    matching the package's boundary convention but not its FFT route."""
    pad = [(s // 2, s // 2) for s in kernel.shape]
    fp = np.pad(field, pad, mode="reflect")
    out = np.zeros_like(np.asarray(field, dtype=float))
    it = np.ndindex(*field.shape)
    kidx = list(np.ndindex(*kernel.shape))
    kflat = kernel.ravel()
    for pos in it:
        acc = 0.0
        for kk, kval in zip(kidx, kflat):
            src = tuple(p + q for p, q in zip(pos, kk))
            acc += kval * fp[src]
        out[pos] = acc
    return out


def schwarzschild_kerr_schild(t, x, y, z, m):
    """Schwarzschild metric in Kerr-Schild form (a = 0 reference)."""
    r = np.sqrt(x * x + y * y + z * z)
    ell = np.array([1.0, x / r, y / r, z / r])
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    return eta + (2.0 * m / r) * np.outer(ell, ell)
