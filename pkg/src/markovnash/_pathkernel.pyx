# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernel: one player's state-action path under a
stationary policy, consuming pre-drawn uniforms.

The pure-Python twin in ``_pathkernel_py`` performs the exact same
comparisons on the same arrays, so both backends produce bitwise-identical
paths for identical inputs.
"""

import numpy as np

cimport numpy as cnp


def step_pairs(double[:, ::1] policy_cdf,
               long long[::1] pair_base,
               double[:, ::1] trans_cdf,
               long long x0,
               double[::1] u_act,
               double[::1] u_trans,
               long long[::1] out_pairs):
    """Fill ``out_pairs`` with flat state-action indices; return final state.

    ``policy_cdf[x]`` is the action CDF at state x (padded with 1.0);
    ``trans_cdf[k]`` is the next-state CDF for flat pair k;
    ``pair_base[x]`` is the flat index of (x, first action).
    """
    cdef Py_ssize_t T = u_act.shape[0]
    cdef Py_ssize_t t
    cdef long long x = x0
    cdef long long a, k, y
    for t in range(T):
        a = 0
        while policy_cdf[x, a] <= u_act[t]:
            a += 1
        k = pair_base[x] + a
        out_pairs[t] = k
        y = 0
        while trans_cdf[k, y] <= u_trans[t]:
            y += 1
        x = y
    return x
