"""Pure-Python twin of the compiled trajectory kernel.

Performs the identical comparisons on the identical arrays as
``_pathkernel.pyx``, so the two backends yield bitwise-equal paths.
Selected at import time by :mod:`markovnash.kernels` when the compiled
extension is unavailable (or forced via MARKOVNASH_PURE_PYTHON=1).
"""

from bisect import bisect_right


def step_pairs(policy_cdf, pair_base, trans_cdf, x0, u_act, u_trans, out_pairs):
    """Fill ``out_pairs`` with flat state-action indices; return final state."""
    # Python lists + bisect are ~3x faster than scalar numpy indexing here.
    pol_rows = [row.tolist() for row in policy_cdf]
    trans_rows = [row.tolist() for row in trans_cdf]
    base = pair_base.tolist()
    ua = u_act.tolist()
    ut = u_trans.tolist()
    out = out_pairs
    x = int(x0)
    for t in range(len(ua)):
        # bisect_right(row, u) == first index with row[idx] > u, same as the
        # compiled while-loop.
        k = base[x] + bisect_right(pol_rows[x], ua[t])
        out[t] = k
        x = bisect_right(trans_rows[k], ut[t])
    return x
