"""NumPy fallback for the MI kernels, used when the extension is not built."""
import math

import numpy as np

BACKEND = "python"


def _mi_rows(joint, cx, cy, n):
    # joint: (rows, nb, nb) counts; marginals shared by every row
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log(n * joint / np.multiply.outer(cx, cy))
    terms[joint == 0] = 0.0
    return terms.sum(axis=(1, 2)) / n


def joint_mi(bx, by, nb):
    n = bx.shape[0]
    joint = np.bincount(bx * nb + by, minlength=nb * nb).reshape(nb, nb).astype(float)
    cx = np.bincount(bx, minlength=nb).astype(float)
    cy = np.bincount(by, minlength=nb).astype(float)
    k, l = np.nonzero(joint)
    c = joint[k, l]
    # exact summation makes the result independent of argument order
    return math.fsum((c * np.log(n * c / (cx[k] * cy[l]))).tolist()) / n


def perm_mi(bx, by, nb, perms):
    n_perm, n = perms.shape
    cells = bx[perms] * nb + by[None, :] + (np.arange(n_perm) * nb * nb)[:, None]
    joint = np.bincount(cells.ravel(), minlength=n_perm * nb * nb)
    joint = joint.reshape(n_perm, nb, nb).astype(float)
    cx = np.bincount(bx, minlength=nb).astype(float)
    cy = np.bincount(by, minlength=nb).astype(float)
    return _mi_rows(joint, cx, cy, n)


def fisher_yates(u):
    rows, n = u.shape[0], u.shape[1] + 1
    out = np.tile(np.arange(n, dtype=np.intp), (rows, 1))
    r = np.arange(rows)
    for i in range(n - 1, 0, -1):
        j = np.minimum((u[:, n - 1 - i] * (i + 1)).astype(np.intp), i)
        a = out[:, i].copy()
        out[:, i] = out[r, j]
        out[r, j] = a
    return out
