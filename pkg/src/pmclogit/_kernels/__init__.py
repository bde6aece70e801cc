"""Likelihood kernel backend selection.

The fused per-chunk reductions (the hot path inside Newton iterations) come
from the compiled extension when it was built, otherwise from the numpy
fallback. Row-wise helpers are cold-path and always use the numpy
implementation, so their results are backend independent.

Set ``PMCLOGIT_PURE_PYTHON=1`` to force the fallback (used by the kernel
benchmark and by tests that exercise both backends).
"""

import os

from . import likelihood_py as _py

LINK_LOGIT = _py.LINK_LOGIT
LINK_PROBIT = _py.LINK_PROBIT
TINY = _py.TINY

ologit_terms = _py.ologit_terms
ologit_score_rows = _py.ologit_score_rows
mnl_terms = _py.mnl_terms
mnl_score_rows = _py.mnl_score_rows

BACKEND = "python"
ologit_chunk = _py.ologit_chunk
mnl_chunk = _py.mnl_chunk

if not os.environ.get("PMCLOGIT_PURE_PYTHON"):
    try:
        from . import _likelihood as _ext

        ologit_chunk = _ext.ologit_chunk
        mnl_chunk = _ext.mnl_chunk
        BACKEND = "compiled"
    except ImportError:
        pass
