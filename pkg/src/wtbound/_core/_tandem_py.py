"""NumPy implementation of the tandem slot loop, vectorized over trials.

Performs the same floating-point operations in the same order as the
compiled version, so both produce bit-identical departure curves.
"""

import numpy as np


def propagate(cap, arrivals, backlog, store_forward, out):
    cap = np.asarray(cap, dtype=float)
    B, H, N = cap.shape
    arrivals = np.asarray(arrivals, dtype=float)
    backlog = np.asarray(backlog, dtype=float)
    if arrivals.shape[0] < H or backlog.shape[0] != N:
        raise ValueError("arrivals/backlog do not match capacity array")
    if out.shape != (B, H + 1):
        raise ValueError("out must have shape (trials, slots + 1)")
    q = np.tile(backlog, (B, 1))
    fly = np.zeros((B, N))
    dep = np.zeros(B)
    out[:, 0] = 0.0
    for i in range(H):
        if store_forward:
            q[:, 1:] += fly[:, 1:]
            q[:, 0] += arrivals[i]
            o = np.minimum(q, cap[:, i, :])
            q -= o
            fly[:, 1:] = o[:, :-1]
            dep += o[:, -1]
        else:
            q[:, 0] += arrivals[i]
            for n in range(N):
                o = np.minimum(q[:, n], cap[:, i, n])
                q[:, n] -= o
                if n + 1 < N:
                    q[:, n + 1] += o
                else:
                    dep += o
        out[:, i + 1] = dep
    return out
