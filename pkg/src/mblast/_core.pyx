# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: iterative detector loop and Viterbi path search.

Semantics mirror :mod:`mblast._core_py`; see that module for the contract.
"""

import numpy as np

from libc.math cimport tanh, fabs


def run_iterations(h, y, double sigma2_hat, double beta, int t_max,
                   bint use_onsager, bint literal_self_term,
                   double early_exit_tol):
    cdef double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t rows = hv.shape[0]
    cdef Py_ssize_t n = hv.shape[1]

    m_traj_arr = np.empty((t_max, n))
    z_traj_arr = np.empty((t_max, rows))
    o_traj_arr = np.empty((t_max, rows))
    arg_arr = np.zeros(n)
    gdiag_arr = np.zeros(n)
    m_arr = np.zeros(n)
    z_arr = np.zeros(rows)
    o_arr = np.zeros(rows)
    w_arr = np.zeros(n)

    cdef double[:, ::1] m_traj = m_traj_arr
    cdef double[:, ::1] z_traj = z_traj_arr
    cdef double[:, ::1] o_traj = o_traj_arr
    cdef double[::1] arg = arg_arr
    cdef double[::1] gdiag = gdiag_arr
    cdef double[::1] m = m_arr
    cdef double[::1] z = z_arr
    cdef double[::1] o = o_arr
    cdef double[::1] w = w_arr

    cdef double coeff = 2.0 / sigma2_hat
    cdef double self_sign = -1.0 if literal_self_term else 1.0
    cdef Py_ssize_t i, j, t
    cdef int t_run = 0
    cdef double acc, mnew, msq, delta, onsager_coeff, zi

    # column norms; row-major pass keeps the matrix accesses contiguous
    for i in range(rows):
        for j in range(n):
            gdiag[j] += hv[i, j] * hv[i, j]

    for t in range(t_max):
        # z = y - H m + o
        for i in range(rows):
            acc = yv[i] + o[i]
            for j in range(n):
                acc -= hv[i, j] * m[j]
            z[i] = acc
            z_traj[t, i] = acc
        # w = H^T z, accumulated row-wise for contiguity
        for j in range(n):
            w[j] = 0.0
        for i in range(rows):
            zi = z[i]
            for j in range(n):
                w[j] += hv[i, j] * zi
        # m <- tanh(coeff * (self_sign * gdiag * m + w))
        msq = 0.0
        delta = 0.0
        for j in range(n):
            acc = coeff * (self_sign * gdiag[j] * m[j] + w[j])
            arg[j] = acc
            mnew = tanh(acc)
            if fabs(mnew - m[j]) > delta:
                delta = fabs(mnew - m[j])
            m[j] = mnew
            m_traj[t, j] = mnew
            msq += mnew * mnew
        if use_onsager:
            onsager_coeff = beta * (1.0 - msq / n)
            for i in range(rows):
                o[i] = onsager_coeff * z[i]
        for i in range(rows):
            o_traj[t, i] = o[i]
        t_run = t + 1
        if early_exit_tol > 0.0 and delta < early_exit_tol:
            break

    return (m_traj_arr[:t_run], z_traj_arr[:t_run], o_traj_arr[:t_run],
            arg_arr, t_run)


def viterbi_path(llr_pairs, out0, out1, int n_tail):
    cdef double[:, ::1] llr = np.ascontiguousarray(llr_pairs, dtype=np.float64)
    cdef signed char[:, ::1] o0 = np.ascontiguousarray(out0, dtype=np.int8)
    cdef signed char[:, ::1] o1 = np.ascontiguousarray(out1, dtype=np.int8)
    cdef Py_ssize_t steps = llr.shape[0]
    cdef int num_states = o0.shape[0]
    cdef int top_shift = 0
    cdef int tmp = num_states
    while tmp > 2:
        tmp >>= 1
        top_shift += 1
    cdef int low_mask = (num_states >> 1) - 1

    pm_arr = np.full(num_states, -1e300)
    pm_arr[0] = 0.0
    pm_new_arr = np.empty(num_states)
    choice_arr = np.empty((steps, num_states), dtype=np.uint8)
    bits_arr = np.empty(steps, dtype=np.uint8)

    cdef double[::1] pm = pm_arr
    cdef double[::1] pm_new = pm_new_arr
    cdef unsigned char[:, ::1] choice = choice_arr
    cdef unsigned char[::1] bits = bits_arr

    cdef Py_ssize_t t
    cdef int ns, u, p0, p1, cur
    cdef double l0, l1, g0, g1, c0, c1

    for t in range(steps):
        l0 = llr[t, 0]
        l1 = llr[t, 1]
        for ns in range(num_states):
            u = ns >> top_shift
            p0 = 2 * (ns & low_mask)
            p1 = p0 + 1
            g0 = l0 * (1.0 - 2.0 * o0[p0, u]) + l1 * (1.0 - 2.0 * o1[p0, u])
            g1 = l0 * (1.0 - 2.0 * o0[p1, u]) + l1 * (1.0 - 2.0 * o1[p1, u])
            c0 = pm[p0] + g0
            c1 = pm[p1] + g1
            if c1 > c0:
                pm_new[ns] = c1
                choice[t, ns] = 1
            else:
                pm_new[ns] = c0
                choice[t, ns] = 0
            if t >= steps - n_tail and u == 1:
                pm_new[ns] = -1e300
        for ns in range(num_states):
            pm[ns] = pm_new[ns]

    cur = 0
    for t in range(steps - 1, -1, -1):
        bits[t] = <unsigned char> (cur >> top_shift)
        cur = 2 * (cur & low_mask) + choice[t, cur]
    return bits_arr
