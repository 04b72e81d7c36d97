"""Compiled inner loops for Euler--Maruyama stepping and posterior sums.

Every loop runs in strict time order so results do not depend on how a
trajectory is chunked.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def euler_feedback(x0, A, B, G, v, dW, dt, Qx, Qu, states, actions,
                   stage_cost, threshold):
    """Simulate ``dx = (A x + B u) dt + dW`` with ``u = G x + v``.

    Writes into ``states`` (n+1, p), ``actions`` (n, q) and ``stage_cost``
    (n,).  Returns the number of completed steps; stops early once the
    Euclidean norm of the state exceeds ``threshold`` or becomes non-finite.
    """
    n = dW.shape[0]
    p = A.shape[0]
    q = B.shape[1]
    x = np.empty(p)
    u = np.empty(q)
    for i in range(p):
        x[i] = x0[i]
        states[0, i] = x0[i]
    for k in range(n):
        for i in range(q):
            s = 0.0
            for j in range(p):
                s += G[i, j] * x[j]
            u[i] = s + v[k, i]
            actions[k, i] = u[i]
        c = 0.0
        for i in range(p):
            s = 0.0
            for j in range(p):
                s += Qx[i, j] * x[j]
            c += x[i] * s
        for i in range(q):
            s = 0.0
            for j in range(q):
                s += Qu[i, j] * u[j]
            c += u[i] * s
        stage_cost[k] = c * dt
        nrm = 0.0
        for i in range(p):
            s = 0.0
            for j in range(p):
                s += A[i, j] * x[j]
            for j in range(q):
                s += B[i, j] * u[j]
            states[k + 1, i] = x[i] + s * dt + dW[k, i]
        for i in range(p):
            x[i] = states[k + 1, i]
            nrm += x[i] * x[i]
        if not (np.sqrt(nrm) <= threshold):
            return k + 1
    return n


@njit(cache=True)
def accumulate_moments(precision, cross, Z, dX, dt):
    """In place: ``precision += z z' dt`` and ``cross += z dx'`` row by row."""
    n, d = Z.shape
    p = dX.shape[1]
    for k in range(n):
        for i in range(d):
            zi = Z[k, i]
            for j in range(d):
                precision[i, j] += zi * Z[k, j] * dt
            for j in range(p):
                cross[i, j] += zi * dX[k, j]
