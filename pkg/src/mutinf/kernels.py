"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``MUTINF_PURE_PYTHON=1``
to force the numpy fallback (useful for benchmarking and cross-checking).
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("MUTINF_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def kendall_score(x, y, impl=None):
    return int((impl or _impl).kendall_score(_f64(x), _f64(y)))


def dcov_sums(x, y, impl=None):
    return (impl or _impl).dcov_sums(_f64(x), _f64(y))


def ksg_counts(x, y, k, impl=None):
    return (impl or _impl).ksg_counts(_f64(x), _f64(y), int(k))


def equipartition(group_sizes, nbins, impl=None):
    out, used = (impl or _impl).equipartition(_i64(group_sizes), int(nbins))
    return np.asarray(out), int(used)


def mic_dp(prefix, xlogx, max_bins, impl=None):
    prefix = np.ascontiguousarray(np.asarray(prefix, dtype=np.int64))
    return np.asarray((impl or _impl).mic_dp(prefix, _f64(xlogx), int(max_bins)))


def scn_visibility(cam_x, cam_y, ux, uy, cos_half, r_near, r_far, tx, ty, pillars, impl=None):
    pillars = np.ascontiguousarray(np.asarray(pillars, dtype=np.float64).reshape(-1, 4))
    rewards, vis = (impl or _impl).scn_visibility(
        _f64(cam_x), _f64(cam_y), _f64(ux), _f64(uy), _f64(cos_half),
        _f64(r_near), _f64(r_far), _f64(tx), _f64(ty), pillars,
    )
    return np.asarray(rewards), np.asarray(vis)


def backends():
    """All importable kernel modules keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
