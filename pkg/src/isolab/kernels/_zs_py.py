"""Pure-numpy propagation kernel for the 2x2 spectral system.

One Magnus step of size h uses the coefficient matrix at the two
Gauss-Legendre points of the step,

    A(x) = [[-i lam, u(x)], [conj(u(x)), i lam]],

and the fourth-order update exp((h/2)(A1+A2) - (sqrt(3) h^2/12)[A1, A2]).
The generator is trace-free and conjugation-symmetric, so every step
matrix (and hence the one-period matrix) has unit determinant and the
form [[m11, m12], [conj(m12), conj(m11)]] exactly; only the top row is
carried. Work is vectorized across the spectral parameters.
"""
import numpy as np

_SQRT3 = np.sqrt(3.0)
_SERIES_CUT = 1e-12


def _cos_sinc(q):
    """cos(sqrt(-q)) and sin(sqrt(-q))/sqrt(-q), valid for either sign of q."""
    q = np.asarray(q, dtype=float)
    cc = np.empty_like(q)
    ss = np.empty_like(q)
    pos = q > _SERIES_CUT
    neg = q < -_SERIES_CUT
    mid = ~(pos | neg)
    r = np.sqrt(q[pos])
    cc[pos] = np.cosh(r)
    ss[pos] = np.sinh(r) / r
    w = np.sqrt(-q[neg])
    cc[neg] = np.cos(w)
    ss[neg] = np.sin(w) / w
    qm = q[mid]
    cc[mid] = 1.0 + 0.5 * qm * (1.0 + qm / 12.0)
    ss[mid] = 1.0 + qm / 6.0 * (1.0 + qm / 20.0)
    return cc, ss


def propagate_monodromy(u1, u2, h, lams):
    """Fundamental matrix over all steps for each spectral parameter.

    u1, u2: complex potential samples at the first/second Gauss point of
    each of the S steps. Returns an (L, 2, 2) complex array.
    """
    lams = np.ascontiguousarray(lams, dtype=float)
    kappa = _SQRT3 * h * h / 12.0
    m11 = np.ones(lams.shape[0], dtype=complex)
    m12 = np.zeros(lams.shape[0], dtype=complex)
    for i in range(u1.shape[0]):
        a = u1[i]
        b = u2[i]
        alpha = -lams * h - 2.0 * kappa * (a * np.conj(b)).imag
        off = 0.5 * h * (a + b) - 2j * kappa * lams * (a - b)
        cc, ss = _cos_sinc(off.real**2 + off.imag**2 - alpha * alpha)
        s11 = cc + 1j * (ss * alpha)
        s12 = ss * off
        n11 = s11 * m11 + s12 * np.conj(m12)
        n12 = s11 * m12 + s12 * np.conj(m11)
        m11, m12 = n11, n12
    out = np.empty((lams.shape[0], 2, 2), dtype=complex)
    out[:, 0, 0] = m11
    out[:, 0, 1] = m12
    out[:, 1, 0] = np.conj(m12)
    out[:, 1, 1] = np.conj(m11)
    return out


def propagate_solution(u1, u2, h, lam, f0, stride):
    """Propagate one initial vector, recording every `stride` step boundaries.

    Returns an (S//stride + 1, 2) array of solution samples, the first
    row being f0 itself.
    """
    steps = u1.shape[0]
    if steps % stride != 0:
        raise ValueError("stride must divide the step count")
    kappa = _SQRT3 * h * h / 12.0
    f1 = complex(f0[0])
    f2 = complex(f0[1])
    out = np.empty((steps // stride + 1, 2), dtype=complex)
    out[0, 0] = f1
    out[0, 1] = f2
    for i in range(steps):
        a = complex(u1[i])
        b = complex(u2[i])
        alpha = -lam * h - 2.0 * kappa * (a * b.conjugate()).imag
        off = 0.5 * h * (a + b) - 2j * kappa * lam * (a - b)
        q = off.real * off.real + off.imag * off.imag - alpha * alpha
        if q > _SERIES_CUT:
            r = np.sqrt(q)
            cc = np.cosh(r)
            ss = np.sinh(r) / r
        elif q < -_SERIES_CUT:
            w = np.sqrt(-q)
            cc = np.cos(w)
            ss = np.sin(w) / w
        else:
            cc = 1.0 + 0.5 * q * (1.0 + q / 12.0)
            ss = 1.0 + q / 6.0 * (1.0 + q / 20.0)
        s11 = cc + 1j * (ss * alpha)
        s12 = ss * off
        g1 = s11 * f1 + s12 * f2
        g2 = s12.conjugate() * f1 + s11.conjugate() * f2
        f1, f2 = g1, g2
        if (i + 1) % stride == 0:
            out[(i + 1) // stride, 0] = f1
            out[(i + 1) // stride, 1] = f2
    return out
