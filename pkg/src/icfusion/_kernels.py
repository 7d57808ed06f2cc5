"""Compiled convolution kernel.

Each output element is reduced sequentially in the order
(input channel, kernel row, kernel column), then the bias is added. This is
the same order as ``nn.conv2d_reference``, so results agree bitwise.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def conv_forward_range(xpad, weight, bias, has_bias, groups, dilation, out, start, stop):
    c_out = out.shape[1]
    h_out = out.shape[2]
    w_out = out.shape[3]
    cpg = weight.shape[1]
    k = weight.shape[2]
    copg = c_out // groups
    acc = np.empty((h_out, w_out), dtype=np.float64)
    for job in range(start, stop):
        b = job // c_out
        co = job % c_out
        base = (co // copg) * cpg
        acc[:, :] = 0.0
        for ci in range(cpg):
            cin = base + ci
            for ky in range(k):
                oy = ky * dilation
                for kx in range(k):
                    ox = kx * dilation
                    wv = weight[co, ci, ky, kx]
                    for y in range(h_out):
                        for x in range(w_out):
                            acc[y, x] += wv * xpad[b, cin, y + oy, x + ox]
        if has_bias:
            bv = bias[co]
            for y in range(h_out):
                for x in range(w_out):
                    out[b, co, y, x] = acc[y, x] + bv
        else:
            for y in range(h_out):
                for x in range(w_out):
                    out[b, co, y, x] = acc[y, x]
