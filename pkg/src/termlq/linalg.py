"""Small shared numerical kernels: symmetry, definiteness tests with scaled
tolerances, and minimum-norm linear solves."""

from __future__ import annotations

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]

# eigenvalue slack for definiteness tests, scaled by the matrix magnitude
PSD_TOL = 1e-9
# singular values below max(shape) * sigma_max * RANK_RTOL count as zero
RANK_RTOL = 1e-12


def sym(M: Array) -> Array:
    # (M + M') / 2, guards asymmetric drift from accumulated roundoff
    return (M + M.T) / 2.0


def ro(a) -> Array:
    """Contiguous float64 copy with the write flag cleared."""
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


def min_eigenvalue(M: Array) -> float:
    return float(np.linalg.eigvalsh(sym(M))[0])


def _scaled_tol(M: Array) -> float:
    scale = float(np.abs(M).max()) if M.size else 0.0
    return PSD_TOL * scale


def is_psd(M: Array) -> tuple[bool, float]:
    """(verdict, smallest eigenvalue) for the positive semi-definite test."""
    lo = min_eigenvalue(M)
    return lo >= -_scaled_tol(M), lo


def is_pd(M: Array) -> tuple[bool, float]:
    """(verdict, smallest eigenvalue) for the positive definite test."""
    lo = min_eigenvalue(M)
    return lo > _scaled_tol(M), lo


def rank_cutoff(M: Array, s: Array) -> float:
    smax = float(s[0]) if s.size else 0.0
    return max(M.shape) * smax * RANK_RTOL


def numerical_rank(M: Array) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int((s > rank_cutoff(M, s)).sum())


def min_norm_solve(M: Array, rhs: Array, scale: float = 0.0) -> tuple[Array, float, int]:
    """Minimum-norm least-squares solution of M y = rhs.

    Returns (y, residual 2-norm, numerical rank of M). Uses the singular
    value decomposition with the shared rank cutoff so every module applies
    one range test. A positive scale widens the cutoff reference beyond
    sigma_max: callers whose M carries noise from an earlier computation
    pass that computation's magnitude so a numerically-zero M keeps rank 0
    instead of inverting its own noise.
    """
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    smax = float(s[0]) if s.size else 0.0
    cutoff = max(M.shape) * max(smax, float(scale)) * RANK_RTOL
    keep = s > cutoff
    rank = int(keep.sum())
    coeff = np.zeros_like(s)
    coeff[keep] = (U.T @ rhs)[keep] / s[keep]
    y = Vt.T @ coeff
    resid = float(np.linalg.norm(M @ y - rhs))
    return y, resid, rank


def range_tol(xi: Array) -> float:
    # relative residual test, robust to target scale
    return 1e-6 * max(1.0, float(np.linalg.norm(xi)))
