"""Dense decomposition kernels behind the tensor operations.

scipy provides the baseline; torch's LAPACK is used for larger blocks when
available (noticeably faster eigh/svd on some hosts).  All outputs are
deterministic for identical inputs: singular/eigen vectors get a fixed
phase gauge (first significant entry real positive).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

try:
    import torch

    if not torch.get_num_threads():
        pass
    _TORCH = True
except Exception:  # pragma: no cover - torch simply absent
    torch = None
    _TORCH = False

_TORCH_MIN_DIM = 96


def fix_phases(u: np.ndarray, vh: np.ndarray | None):
    """Rotate each column of u so its first significant entry is real positive."""
    mags = np.abs(u)
    tops = mags.max(axis=0)
    live = tops > 0.0
    first = np.argmax(mags > 1e-12 * np.where(live, tops, 1.0), axis=0)
    anchors = u[first, np.arange(u.shape[1])]
    safe = np.where(anchors == 0, 1.0, anchors)
    phases = np.where(live & (np.abs(anchors) > 0), safe / np.abs(safe), 1.0)
    u = u * phases.conjugate()
    if vh is not None:
        vh = phases[:, None] * vh
    return u, vh


def svd(mat: np.ndarray):
    """Economy SVD with descending values and the deterministic phase gauge."""
    if _TORCH and min(mat.shape) >= _TORCH_MIN_DIM:
        t = torch.from_numpy(np.ascontiguousarray(mat))
        try:
            tu, ts, tvh = torch.linalg.svd(t, full_matrices=False)
            u, s, vh = tu.numpy(), ts.numpy(), tvh.numpy()
            u, vh = fix_phases(u, vh)
            return u, s, vh
        except Exception:
            pass
    try:
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    u, vh = fix_phases(u, vh)
    return u, s, vh


def svdvals(mat: np.ndarray) -> np.ndarray:
    if _TORCH and min(mat.shape) >= _TORCH_MIN_DIM:
        try:
            return torch.linalg.svdvals(torch.from_numpy(np.ascontiguousarray(mat))).numpy()
        except Exception:
            pass
    return scipy.linalg.svdvals(mat)


def qr(mat: np.ndarray):
    """Economy QR with a real nonnegative R diagonal."""
    if _TORCH and min(mat.shape) >= _TORCH_MIN_DIM:
        try:
            tq, tr = torch.linalg.qr(torch.from_numpy(np.ascontiguousarray(mat)), mode="reduced")
            q, r = tq.numpy(), tr.numpy()
        except Exception:
            q, r = np.linalg.qr(mat)
    else:
        q, r = np.linalg.qr(mat)
    diag = np.diagonal(r).copy()
    safe = np.where(diag == 0, 1.0, diag)
    phase = np.where(np.abs(diag) > 0, safe / np.abs(safe), 1.0)
    q = q * phase
    r = phase.conjugate()[:, None] * r
    return q, r


def left_factor_gram(mat: np.ndarray):
    """Left singular vectors and values via the (smaller) row-side Gram matrix.

    Returns (u, s) with columns ordered by descending s.  Values below
    sqrt(eps)*s_max carry reduced relative accuracy; callers use this only
    for interim truncations whose semantics a later exact sweep enforces.
    """
    g = mat @ mat.conj().T
    if _TORCH and g.shape[0] >= _TORCH_MIN_DIM:
        try:
            lam_t, u_t = torch.linalg.eigh(torch.from_numpy(g))
            lam, u = lam_t.numpy(), u_t.numpy()
        except Exception:
            lam, u = scipy.linalg.eigh(g)
    else:
        lam, u = scipy.linalg.eigh(g)
    lam = lam[::-1].copy()
    u = u[:, ::-1].copy()
    s = np.sqrt(np.maximum(lam, 0.0))
    u, _ = fix_phases(u, None)
    return u, s
