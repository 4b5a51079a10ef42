"""Hot loops, compiled when possible.

The Cython extension ``_ckernels`` is used when it imports; otherwise, or
when ``RNMSR_PURE_PYTHON=1`` is set, the numpy fallback in ``_pykernels``
is used.  Both expose:

``scatter_add_rows(out, idx, vals)``
    In place ``out[idx[i]] += vals[i]`` with repeated indices accumulating.
``session_layout(items, lengths, l_max, l_pos)``
    Per-session node tables, precedence candidates, sequential adjacency,
    reversed positions, repeat window and GBP keys for a padded batch.
``target_ranks(scores, targets)``
    1-based rank of each target, ties broken by ascending index.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
impl = _pykernels

if os.environ.get("RNMSR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass


def scatter_add_rows(out, idx, vals):
    if BACKEND == "cython" and out.dtype == vals.dtype and out.flags.c_contiguous:
        impl.scatter_add_rows(out, np.ascontiguousarray(idx, dtype=np.int64), np.ascontiguousarray(vals))
    else:
        _pykernels.scatter_add_rows(out, idx, vals)


def session_layout(items, lengths, l_max, l_pos):
    return impl.session_layout(items, lengths, l_max, l_pos)


def target_ranks(scores, targets):
    return impl.target_ranks(scores, targets)
