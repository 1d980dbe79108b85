# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-cell loops; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def local_triplets(const long long[::1] dof_ptr, const long long[::1] dofs,
                   const double[::1] signs, const long long[::1] mat_ptr,
                   const double[::1] mats):
    cdef Py_ssize_t nc = dof_ptr.shape[0] - 1
    cdef Py_ssize_t nnz = mat_ptr[nc]
    rows_a = np.empty(nnz, dtype=np.int64)
    cols_a = np.empty(nnz, dtype=np.int64)
    vals_a = np.empty(nnz, dtype=np.float64)
    cdef long long[::1] rows = rows_a
    cdef long long[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    cdef Py_ssize_t k, i, j, nd, d0, m0, pos
    with nogil:
        for k in range(nc):
            d0 = dof_ptr[k]
            nd = dof_ptr[k + 1] - d0
            m0 = mat_ptr[k]
            for i in range(nd):
                for j in range(nd):
                    pos = m0 + i * nd + j
                    rows[pos] = dofs[d0 + i]
                    cols[pos] = dofs[d0 + j]
                    vals[pos] = signs[d0 + i] * signs[d0 + j] * mats[pos]
    return rows_a, cols_a, vals_a


def trilinear_residual(const long long[::1] dof_ptr, const long long[::1] dofs,
                       const double[::1] signs, const long long[::1] mat_ptr,
                       const double[::1] K, const double[::1] lap,
                       const double[::1] zeta, const double[::1] phi, Py_ssize_t n):
    cdef Py_ssize_t nc = dof_ptr.shape[0] - 1
    r_a = np.zeros(n, dtype=np.float64)
    cdef double[::1] r = r_a
    cdef Py_ssize_t k, i, j, nd, d0, m0
    cdef double lz, acc
    with nogil:
        for k in range(nc):
            d0 = dof_ptr[k]
            nd = dof_ptr[k + 1] - d0
            m0 = mat_ptr[k]
            lz = 0.0
            for j in range(nd):
                lz = lz + lap[d0 + j] * signs[d0 + j] * zeta[dofs[d0 + j]]
            if lz == 0.0:
                continue
            for i in range(nd):
                acc = 0.0
                for j in range(nd):
                    acc = acc + K[m0 + i * nd + j] * signs[d0 + j] * phi[dofs[d0 + j]]
                r[dofs[d0 + i]] += signs[d0 + i] * lz * acc
    return r_a


def trilinear_jacobian(const long long[::1] dof_ptr, const long long[::1] dofs,
                       const double[::1] signs, const long long[::1] mat_ptr,
                       const double[::1] K, const double[::1] lap,
                       const double[::1] psi):
    cdef Py_ssize_t nc = dof_ptr.shape[0] - 1
    vals_a = np.empty(mat_ptr[nc], dtype=np.float64)
    cdef double[::1] vals = vals_a
    cdef double[64] p
    cdef double[64] kp
    cdef Py_ssize_t k, i, j, nd, d0, m0
    cdef double lz, acc
    with nogil:
        for k in range(nc):
            d0 = dof_ptr[k]
            nd = dof_ptr[k + 1] - d0
            m0 = mat_ptr[k]
            lz = 0.0
            for j in range(nd):
                p[j] = signs[d0 + j] * psi[dofs[d0 + j]]
                lz = lz + lap[d0 + j] * p[j]
            for i in range(nd):
                acc = 0.0
                for j in range(nd):
                    acc = acc + K[m0 + i * nd + j] * p[j]
                kp[i] = acc
            for i in range(nd):
                for j in range(nd):
                    vals[m0 + i * nd + j] = lz * K[m0 + i * nd + j] + kp[i] * lap[d0 + j]
    return vals_a
