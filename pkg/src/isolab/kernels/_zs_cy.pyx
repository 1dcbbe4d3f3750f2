# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled propagation kernel; arithmetic mirrors _zs_py exactly."""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, cosh, sin, sinh, sqrt

cnp.import_array()

cdef double _SQRT3 = sqrt(3.0)
cdef double _SERIES_CUT = 1e-12


cdef inline void _cos_sinc_scalar(double q, double *cc, double *ss) nogil:
    cdef double r, w
    if q > _SERIES_CUT:
        r = sqrt(q)
        cc[0] = cosh(r)
        ss[0] = sinh(r) / r
    elif q < -_SERIES_CUT:
        w = sqrt(-q)
        cc[0] = cos(w)
        ss[0] = sin(w) / w
    else:
        cc[0] = 1.0 + 0.5 * q * (1.0 + q / 12.0)
        ss[0] = 1.0 + q / 6.0 * (1.0 + q / 20.0)


def propagate_monodromy(double complex[::1] u1, double complex[::1] u2,
                        double h, double[::1] lams):
    """Fundamental matrix over all steps for each spectral parameter."""
    cdef Py_ssize_t n_steps = u1.shape[0]
    cdef Py_ssize_t n_lam = lams.shape[0]
    out = np.empty((n_lam, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] mv = out
    cdef double kappa = _SQRT3 * h * h / 12.0
    cdef Py_ssize_t i, j
    cdef double lam, alpha, q, cc, ss, im_ab
    cdef double complex a, b, off, s11, s12, m11, m12, n11, n12, ab
    with nogil:
        for j in range(n_lam):
            lam = lams[j]
            m11 = 1.0
            m12 = 0.0
            for i in range(n_steps):
                a = u1[i]
                b = u2[i]
                ab = a * b.conjugate()
                im_ab = ab.imag
                alpha = -lam * h - 2.0 * kappa * im_ab
                off = 0.5 * h * (a + b) - 2j * kappa * lam * (a - b)
                q = off.real * off.real + off.imag * off.imag - alpha * alpha
                _cos_sinc_scalar(q, &cc, &ss)
                s11 = cc + 1j * (ss * alpha)
                s12 = ss * off
                n11 = s11 * m11 + s12 * m12.conjugate()
                n12 = s11 * m12 + s12 * m11.conjugate()
                m11 = n11
                m12 = n12
            mv[j, 0, 0] = m11
            mv[j, 0, 1] = m12
            mv[j, 1, 0] = m12.conjugate()
            mv[j, 1, 1] = m11.conjugate()
    return out


def propagate_solution(double complex[::1] u1, double complex[::1] u2,
                       double h, double lam, f0, Py_ssize_t stride):
    """Propagate one initial vector, recording every `stride` boundaries."""
    cdef Py_ssize_t n_steps = u1.shape[0]
    if n_steps % stride != 0:
        raise ValueError("stride must divide the step count")
    out = np.empty((n_steps // stride + 1, 2), dtype=np.complex128)
    cdef double complex[:, ::1] mv = out
    cdef double kappa = _SQRT3 * h * h / 12.0
    cdef double complex f1 = complex(f0[0])
    cdef double complex f2 = complex(f0[1])
    cdef Py_ssize_t i
    cdef double alpha, q, cc, ss
    cdef double complex a, b, off, s11, s12, g1, g2, ab
    mv[0, 0] = f1
    mv[0, 1] = f2
    with nogil:
        for i in range(n_steps):
            a = u1[i]
            b = u2[i]
            ab = a * b.conjugate()
            alpha = -lam * h - 2.0 * kappa * ab.imag
            off = 0.5 * h * (a + b) - 2j * kappa * lam * (a - b)
            q = off.real * off.real + off.imag * off.imag - alpha * alpha
            _cos_sinc_scalar(q, &cc, &ss)
            s11 = cc + 1j * (ss * alpha)
            s12 = ss * off
            g1 = s11 * f1 + s12 * f2
            g2 = s12.conjugate() * f1 + s11.conjugate() * f2
            f1 = g1
            f2 = g2
            if (i + 1) % stride == 0:
                mv[(i + 1) // stride, 0] = f1
                mv[(i + 1) // stride, 1] = f2
    return out
