"""Backend selection for the per-cell kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable MORLEY_NS_PURE_PYTHON=1 is set, the numpy fallback is
used.  ``BACKEND`` records which one is active.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("MORLEY_NS_PURE_PYTHON", "0") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def local_triplets(dof_ptr, dofs, signs, mat_ptr, mats, impl=None):
    impl = impl or _impl
    return impl.local_triplets(_i64(dof_ptr), _i64(dofs), _f64(signs), _i64(mat_ptr), _f64(mats))


def trilinear_residual(dof_ptr, dofs, signs, mat_ptr, K, lap, zeta, phi, n, impl=None):
    impl = impl or _impl
    return impl.trilinear_residual(_i64(dof_ptr), _i64(dofs), _f64(signs), _i64(mat_ptr),
                                   _f64(K), _f64(lap), _f64(zeta), _f64(phi), int(n))


# the compiled Jacobian keeps per-cell work arrays on the stack
MAX_COMPILED_DOFS = 64


def trilinear_jacobian(dof_ptr, dofs, signs, mat_ptr, K, lap, psi, impl=None):
    impl = impl or _impl
    if impl is not _kernels_py and len(dof_ptr) > 1 and np.diff(dof_ptr).max() > MAX_COMPILED_DOFS:
        impl = _kernels_py
    return impl.trilinear_jacobian(_i64(dof_ptr), _i64(dofs), _f64(signs), _i64(mat_ptr),
                                   _f64(K), _f64(lap), _f64(psi))
