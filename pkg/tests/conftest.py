"""Shared test setup.

BLAS thread pools are pinned to one thread before numpy loads: the suite's
matrices are tiny, and multithreaded kernels only add scheduling jitter to
the timed acceptance checks.
"""

import os

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
