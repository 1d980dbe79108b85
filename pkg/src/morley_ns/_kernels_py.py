"""Pure numpy implementation of the per-cell hot loops.

All routines take the flattened cell layout of ``MorleySpace``: for cell k
the local dofs are ``dofs[dof_ptr[k]:dof_ptr[k+1]]`` with signs ``signs``
on the same range, and the row-major local matrix lives in
``mats[mat_ptr[k]:mat_ptr[k+1]]``.  Cells are processed in groups of equal
size so every operation is a batched array expression.
"""
from __future__ import annotations

import numpy as np


def _groups(dof_ptr: np.ndarray):
    nds = np.diff(dof_ptr)
    for nd in np.unique(nds):
        yield int(nd), np.flatnonzero(nds == nd)


def _gather(dof_ptr, mat_ptr, dofs, signs, cells, nd):
    base = dof_ptr[cells][:, None] + np.arange(nd)
    mbase = mat_ptr[cells][:, None] + np.arange(nd * nd)
    return dofs[base], signs[base], base, mbase


def local_triplets(dof_ptr, dofs, signs, mat_ptr, mats):
    """COO triplets of sum_k S_k M_k S_k scattered to global indices."""
    nnz = int(mat_ptr[-1])
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for nd, cells in _groups(dof_ptr):
        D, S, _, mb = _gather(dof_ptr, mat_ptr, dofs, signs, cells, nd)
        M = mats[mb].reshape(-1, nd, nd) * S[:, :, None] * S[:, None, :]
        rows[mb] = np.repeat(D, nd, axis=1)
        cols[mb] = np.tile(D, (1, nd))
        vals[mb] = M.reshape(len(cells), -1)
    return rows, cols, vals


def trilinear_residual(dof_ptr, dofs, signs, mat_ptr, K, lap, zeta, phi, n):
    """Global vector r with r . psi = sum_E (Pi0 Lap zeta) (K phi) . psi."""
    r = np.zeros(n)
    for nd, cells in _groups(dof_ptr):
        D, S, base, mb = _gather(dof_ptr, mat_ptr, dofs, signs, cells, nd)
        Kg = K[mb].reshape(-1, nd, nd)
        lz = (lap[base] * S * zeta[D]).sum(1)
        Kp = np.einsum("cij,cj->ci", Kg, S * phi[D])
        np.add.at(r, D, S * lz[:, None] * Kp)
    return r


def trilinear_jacobian(dof_ptr, dofs, signs, mat_ptr, K, lap, psi):
    """Flattened (mat_ptr layout) local Jacobians of psi -> B(psi; psi, .).

    Local Jacobian (l.psi) K + (K psi) l^T in the cell's own orientation;
    ``local_triplets`` applies the sign conjugation when scattering.
    """
    vals = np.empty(int(mat_ptr[-1]))
    for nd, cells in _groups(dof_ptr):
        D, S, base, mb = _gather(dof_ptr, mat_ptr, dofs, signs, cells, nd)
        Kg = K[mb].reshape(-1, nd, nd)
        lg = lap[base]
        p = S * psi[D]
        lz = (lg * p).sum(1)
        Kp = np.einsum("cij,cj->ci", Kg, p)
        J = lz[:, None, None] * Kg + Kp[:, :, None] * lg[:, None, :]
        vals[mb] = J.reshape(len(cells), -1)
    return vals
