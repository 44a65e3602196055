"""Model-free recovery of the terminal-constrained LQ controller.

The learner never reads the plant matrices. Per stage it probes the plant
with Gaussian (state, input, multiplier) triples, observes one-step
transitions through a TransitionOracle, and fits the stage kernel Lambda(k)
of the quadratic form

    q(x, u, lam) = z' Lambda(k) z,   z = (x, u, lambda)

by linear least squares on the packed upper triangle. Feedback and
feedforward gains, the value kernels P(k), the closed-loop products
Phi(k,N), the Gramian G(k), and finally the multiplier lambda* all come out
of the fitted blocks; the backward pass carries only learned quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CarryMissing,
    InsufficientSamples,
    NotReachable,
    OracleMiss,
    RankDeficient,
    SingularBlock,
)
from .linalg import Array, RANK_RTOL, is_pd, min_norm_solve, range_tol, ro, sym
from .model import ModelSchedule, ProblemInstance

# fitted residuals above this fraction of ||gamma|| get flagged
RESIDUAL_WARN_RTOL = 1e-6


class TransitionOracle:
    """One-step plant access: step(k, x, u) -> x_next. Implementations hide
    the system matrices from the learner."""

    def step(self, k: int, x: Array, u: Array) -> Array:
        raise NotImplementedError


class SimulatedPlant(TransitionOracle):
    """Noise-free plant wrapper around a hidden instance.

    The learner receives only this object (plus dimensions, cost weights,
    x0, xi); it must not read the wrapped A/B.
    """

    def __init__(self, inst: ProblemInstance):
        self._inst = inst

    def step(self, k: int, x: Array, u: Array) -> Array:
        inst = self._inst
        if not 0 <= k <= inst.N:
            raise OracleMiss(f"stage {k} outside 0..{inst.N}")
        return inst.A[k] @ np.asarray(x, dtype=float) + inst.B[k] @ np.asarray(u, dtype=float)


@dataclass(frozen=True)
class TransitionSample:
    """One recorded probe: (k, x, u, lam, x_next)."""

    k: int
    x: Array
    u: Array
    lam: Array
    x_next: Array


class ReplayLog(TransitionOracle):
    """Serves pre-recorded transitions; raises OracleMiss on any query it
    has no record for. Lookup is exact on (stage, state, input) so a learner
    re-running the recorded seed gets byte-identical answers."""

    def __init__(self, samples: Sequence[TransitionSample]):
        self.samples = tuple(samples)
        self._table: dict[tuple[int, bytes, bytes], Array] = {}
        for s in self.samples:
            key = (int(s.k), _key_bytes(s.x), _key_bytes(s.u))
            self._table.setdefault(key, s.x_next)

    def step(self, k: int, x: Array, u: Array) -> Array:
        key = (int(k), _key_bytes(x), _key_bytes(u))
        hit = self._table.get(key)
        if hit is None:
            raise OracleMiss(f"no recorded transition for stage {k} with the queried (x, u)")
        return hit


def _key_bytes(v: Array) -> bytes:
    return np.ascontiguousarray(v, dtype=np.float64).tobytes()


@dataclass(frozen=True)
class GaussianSpec:
    """Probe distribution: independent Gaussian blocks for x, u and the
    multiplier probe, each mean + sqrt(covariance_scale) * standard normal."""

    x_mean: Array
    u_mean: Array
    lam_mean: Array
    covariance_scale: float = 1.0


def default_gaussian_spec(n: int, m: int, mean: float = 0.0,
                          covariance_scale: float = 1.0) -> GaussianSpec:
    """Zero-mean unit-covariance probes unless overridden."""
    if covariance_scale <= 0:
        raise ValueError("covariance_scale must be positive")
    return GaussianSpec(x_mean=ro(np.full(n, float(mean))),
                        u_mean=ro(np.full(m, float(mean))),
                        lam_mean=ro(np.full(n, float(mean))),
                        covariance_scale=float(covariance_scale))


@dataclass(frozen=True)
class StageDataset:
    """l probes at one stage plus the regression sizes: z_dim = 2n+m and
    feature_dim = z_dim (z_dim + 1) / 2 packed coefficients."""

    k: int
    samples: tuple[TransitionSample, ...]
    z_dim: int
    feature_dim: int


def make_stage_dataset(k: int, samples: Sequence[TransitionSample]) -> StageDataset:
    samples = tuple(samples)
    n = samples[0].x.shape[0]
    m = samples[0].u.shape[0]
    d = 2 * n + m
    return StageDataset(k=int(k), samples=samples, z_dim=d, feature_dim=d * (d + 1) // 2)


def sample_threshold(n: int, m: int) -> int:
    """Least sample count with an identifiable fit: (2n+m)(2n+m+1)/2."""
    d = 2 * n + m
    return d * (d + 1) // 2


def sample_stage_data(oracle: TransitionOracle, k: int, l: int, dist: GaussianSpec,
                      seed: int) -> StageDataset:
    """Draw l i.i.d. Gaussian (x, u, lam) probes for stage k and record the
    oracle's one-step answers. Deterministic given (seed, k); each stage
    uses an independent substream."""
    n = dist.x_mean.shape[0]
    m = dist.u_mean.shape[0]
    need = sample_threshold(n, m)
    if l < need:
        raise InsufficientSamples(f"l={l} below the identifiability threshold {need}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), int(k))))
    std = float(np.sqrt(dist.covariance_scale))
    X = dist.x_mean + std * rng.standard_normal((l, n))
    U = dist.u_mean + std * rng.standard_normal((l, m))
    L = dist.lam_mean + std * rng.standard_normal((l, n))
    samples = []
    for i in range(l):
        x_next = np.asarray(oracle.step(k, X[i], U[i]), dtype=float)
        samples.append(TransitionSample(k=int(k), x=ro(X[i]), u=ro(U[i]),
                                        lam=ro(L[i]), x_next=ro(x_next)))
    return make_stage_dataset(k, samples)


def regressor_row(z: Array) -> Array:
    """Feature row for one probe: upper triangle of z z' in row-major order,
    diagonal entries z_j^2 and off-diagonal entries 2 z_i z_j, so that
    row . nu = z' Lambda z when nu packs Lambda's upper triangle entrywise."""
    z = np.asarray(z, dtype=float)
    d = z.shape[0]
    zz = np.outer(z, z)
    w = 2.0 * zz - np.diag(z * z)
    return w[np.triu_indices(d)]


def regressor_matrix(Z: Array) -> Array:
    """Stacked regressor rows for an (l, d) block of probes."""
    l, d = Z.shape
    iu = np.triu_indices(d)
    prods = Z[:, :, None] * Z[:, None, :]
    scale = np.full((d, d), 2.0)
    np.fill_diagonal(scale, 1.0)
    return (prods * scale)[:, iu[0], iu[1]]


def pack_symmetric(M: Array) -> Array:
    """Row-major upper-triangle vectorization of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    return M[np.triu_indices(M.shape[0])]


def unpack_symmetric(v: Array, d: int) -> Array:
    """Inverse of pack_symmetric: expand a packed vector to the full
    symmetric matrix."""
    out = np.zeros((d, d))
    iu = np.triu_indices(d)
    out[iu] = v
    out.T[iu] = v
    return out


@dataclass(frozen=True)
class QMatrix:
    """Fitted stage kernel Lambda(k), symmetric (2n+m) x (2n+m), with block
    views in the (x, u, lambda) layout."""

    k: int
    n: int
    m: int
    Lambda: Array

    @property
    def L11(self) -> Array:
        n = self.n
        return self.Lambda[:n, :n]

    @property
    def L21(self) -> Array:
        n, m = self.n, self.m
        return self.Lambda[n:n + m, :n]

    @property
    def L22(self) -> Array:
        n, m = self.n, self.m
        return self.Lambda[n:n + m, n:n + m]

    @property
    def L31(self) -> Array:
        n, m = self.n, self.m
        return self.Lambda[n + m:, :n]

    @property
    def L32(self) -> Array:
        n, m = self.n, self.m
        return self.Lambda[n + m:, n:n + m]

    @property
    def L33(self) -> Array:
        n, m = self.n, self.m
        return self.Lambda[n + m:, n + m:]

    @property
    def nu(self) -> Array:
        return pack_symmetric(self.Lambda)


@dataclass(frozen=True)
class FitDiagnostics:
    """Residual 2-norm and regressor condition number of one stage fit."""

    residual: float
    cond: float
    high_residual: bool


@dataclass(frozen=True)
class TerminalWeights:
    """Carry for the last stage: only the terminal weight is needed."""

    H: Array


@dataclass(frozen=True)
class StageCarry:
    """Carry for interior stages: fitted quantities of stage k+1."""

    P_next: Array
    Phi_next: Array
    G_next: Array


@dataclass(frozen=True)
class StageExtract:
    """Per-stage quantities recovered from a fitted kernel."""

    K: Array
    K1: Array
    P: Array
    Phi_row: Array
    G: Array


@dataclass(frozen=True)
class LearnedSchedule:
    """Model-free counterpart of ModelSchedule.

    P, Phi, G are padded to the model shape with the learner-known boundary
    values P(N+1)=H, Phi(N+1,N)=I, G(N+1)=0 so the two schedules compare
    index for index.
    """

    qmatrices: tuple[QMatrix, ...]
    K: tuple[Array, ...]
    K1: tuple[Array, ...]
    P: tuple[Array, ...]
    Phi: tuple[Array, ...]
    G: tuple[Array, ...]
    lambda_star: Array
    fit_diagnostics: tuple[FitDiagnostics, ...]


def stage_targets(ds: StageDataset, Q: Array, R: Array,
                  carry: TerminalWeights | StageCarry | None) -> Array:
    """Regression targets gamma for one stage.

    Terminal stage (TerminalWeights): gamma = x'Qx + u'Ru + x+'Hx+ + 2 x+'lam.
    Interior stage (StageCarry): gamma = x'Qx + u'Ru + x+'P(k+1)x+ +
    2 x+'Phi(k+1,N)'lam - lam'G(k+1)lam, built from fitted carries only.
    """
    if carry is None:
        raise CarryMissing(f"stage {ds.k} target requested without a fitted successor")
    X = np.stack([s.x for s in ds.samples])
    U = np.stack([s.u for s in ds.samples])
    L = np.stack([s.lam for s in ds.samples])
    Xn = np.stack([s.x_next for s in ds.samples])
    gamma = np.einsum("ij,jk,ik->i", X, Q, X) + np.einsum("ij,jk,ik->i", U, R, U)
    if isinstance(carry, TerminalWeights):
        gamma = gamma + np.einsum("ij,jk,ik->i", Xn, carry.H, Xn)
        gamma = gamma + 2.0 * np.einsum("ij,ij->i", Xn, L)
    else:
        gamma = gamma + np.einsum("ij,jk,ik->i", Xn, carry.P_next, Xn)
        gamma = gamma + 2.0 * np.einsum("ij,ij->i", Xn @ carry.Phi_next.T, L)
        gamma = gamma - np.einsum("ij,jk,ik->i", L, carry.G_next, L)
    return gamma


def fit_stage(ds: StageDataset, gamma: Array) -> tuple[QMatrix, FitDiagnostics]:
    """Least-squares fit of the packed kernel coefficients.

    Solves argmin ||Ups nu - gamma||_2 by singular value decomposition (not
    the normal equations), unpacks nu into the symmetric Lambda(k), and
    reports the residual and the regressor condition number. Raises
    RankDeficient when Ups loses column rank at the shared cutoff.
    """
    Z = np.stack([np.concatenate([s.x, s.u, s.lam]) for s in ds.samples])
    Ups = regressor_matrix(Z)
    rcond = max(Ups.shape) * RANK_RTOL
    nu, _, rank, sv = np.linalg.lstsq(Ups, gamma, rcond=rcond)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if rank < ds.feature_dim:
        raise RankDeficient(
            f"stage {ds.k} regressor rank {rank} < {ds.feature_dim}",
            rank=int(rank), cond=cond)
    residual = float(np.linalg.norm(Ups @ nu - gamma))
    warn = residual > RESIDUAL_WARN_RTOL * float(np.linalg.norm(gamma))
    n = ds.samples[0].x.shape[0]
    m = ds.samples[0].u.shape[0]
    qm = QMatrix(k=ds.k, n=n, m=m, Lambda=ro(unpack_symmetric(nu, ds.z_dim)))
    return qm, FitDiagnostics(residual=residual, cond=cond, high_residual=bool(warn))


def extract_stage(qm: QMatrix, G_next: Array) -> StageExtract:
    """Controller pieces from one fitted kernel.

    K = -L22^-1 L21, K1 = -L22^-1 L32', P = L11 - L21' L22^-1 L21,
    Phi_row = L31 - L32 L22^-1 L21 (the row Phi(k,N) of the closed-loop
    table), G = G_next + L32 L22^-1 L32'. At the terminal stage G_next = 0.
    """
    ok, lo = is_pd(sym(qm.L22))
    if not ok:
        raise SingularBlock(f"stage {qm.k} input block has eigenvalue {lo:.6e}")
    L22 = sym(qm.L22)
    W21 = np.linalg.solve(L22, qm.L21)
    W32 = np.linalg.solve(L22, qm.L32.T)
    K = -W21
    K1 = -W32
    P = sym(qm.L11 - qm.L21.T @ W21)
    Phi_row = qm.L31 - qm.L32 @ W21
    G = sym(np.asarray(G_next, dtype=float) + qm.L32 @ W32)
    return StageExtract(K=ro(K), K1=ro(K1), P=ro(P), Phi_row=ro(Phi_row), G=ro(G))


def model_qmatrix(inst: ProblemInstance, sched: ModelSchedule, k: int) -> QMatrix:
    """Stage kernel assembled from the model-based schedule (the quantity the
    fit should recover exactly on noise-free data): blocks Q + A'P(k+1)A,
    B'P(k+1)A, Gamma(k), Phi(k+1,N)A, Phi(k+1,N)B and -G(k+1)."""
    A, B = inst.A[k], inst.B[k]
    P_next = sched.P[k + 1]
    Phi_next = sched.Phi[k + 1]
    n, m = inst.n, inst.m
    d = 2 * n + m
    Lam = np.zeros((d, d))
    Lam[:n, :n] = inst.Q + A.T @ P_next @ A
    Lam[n:n + m, :n] = B.T @ P_next @ A
    Lam[n:n + m, n:n + m] = sched.Gamma[k]
    Lam[n + m:, :n] = Phi_next @ A
    Lam[n + m:, n:n + m] = Phi_next @ B
    Lam[n + m:, n + m:] = -sched.G[k + 1]
    Lam[:n, n:n + m] = Lam[n:n + m, :n].T
    Lam[:n, n + m:] = Lam[n + m:, :n].T
    Lam[n:n + m, n + m:] = Lam[n + m:, n:n + m].T
    return QMatrix(k=k, n=n, m=m, Lambda=ro(sym(Lam)))


def learn(oracle: TransitionOracle, dims: tuple[int, int, int],
          cost: tuple[Array, Array, Array], x0: Array, xi: Array, l: int,
          dist: GaussianSpec | None, seed: int) -> LearnedSchedule:
    """Full model-free pipeline over stages N..0.

    The terminal stage is fitted from terminal-cost targets; every interior
    stage reuses the previously extracted P, Phi, G (never the plant
    matrices). The multiplier solves the stage-0 block equation

        [-L33(0) + L32(0) L22(0)^-1 L32(0)'] lambda
            = [L31(0) - L32(0) L22(0)^-1 L21(0)] x0 - xi

    by the minimum-norm pseudoinverse. Raises NotReachable when that system
    is inconsistent beyond the range tolerance.
    """
    n, m, N = dims
    Q, R, H = (np.asarray(W, dtype=float) for W in cost)
    x0 = np.asarray(x0, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if dist is None:
        dist = default_gaussian_spec(n, m)
    if dist.x_mean.shape != (n,) or dist.u_mean.shape != (m,):
        raise ValueError("probe distribution dimensions do not match dims")

    qms: list[QMatrix] = [None] * (N + 1)  # type: ignore[list-item]
    diags: list[FitDiagnostics] = [None] * (N + 1)  # type: ignore[list-item]
    K: list[Array] = [None] * (N + 1)  # type: ignore[list-item]
    K1: list[Array] = [None] * (N + 1)  # type: ignore[list-item]
    P: list[Array] = [None] * (N + 2)  # type: ignore[list-item]
    Phi: list[Array] = [None] * (N + 2)  # type: ignore[list-item]
    G: list[Array] = [None] * (N + 2)  # type: ignore[list-item]
    P[N + 1] = ro(sym(H))
    Phi[N + 1] = ro(np.eye(n))
    G[N + 1] = ro(np.zeros((n, n)))

    for k in range(N, -1, -1):
        ds = sample_stage_data(oracle, k, l, dist, seed)
        carry = (TerminalWeights(H=H) if k == N else
                 StageCarry(P_next=P[k + 1], Phi_next=Phi[k + 1], G_next=G[k + 1]))
        gamma = stage_targets(ds, Q, R, carry)
        qm, diag = fit_stage(ds, gamma)
        ex = extract_stage(qm, G_next=G[k + 1])
        qms[k], diags[k] = qm, diag
        K[k], K1[k] = ex.K, ex.K1
        P[k], Phi[k], G[k] = ex.P, ex.Phi_row, ex.G

    qm0 = qms[0]
    L22 = sym(qm0.L22)
    W32 = np.linalg.solve(L22, qm0.L32.T)
    M = sym(-qm0.L33 + qm0.L32 @ W32)
    Phi0 = qm0.L31 - qm0.L32 @ np.linalg.solve(L22, qm0.L21)
    # rank the multiplier system against the fitted kernel magnitude: fit
    # noise in a numerically zero G(0) must not pass for invertible
    kernel_scale = float(np.abs(qm0.Lambda).max())
    lam, resid, _ = min_norm_solve(M, Phi0 @ x0 - xi, scale=kernel_scale)
    if resid > range_tol(xi):
        raise NotReachable(
            f"learned multiplier equation residual {resid:.6e} exceeds "
            f"tolerance {range_tol(xi):.6e}")

    return LearnedSchedule(qmatrices=tuple(qms), K=tuple(K), K1=tuple(K1),
                           P=tuple(P), Phi=tuple(Phi), G=tuple(G),
                           lambda_star=ro(lam), fit_diagnostics=tuple(diags))


def learned_policy(ls: LearnedSchedule):
    """Control law (stage, state) -> input from a learned schedule."""
    def policy(k: int, x: Array) -> Array:
        return ls.K[k] @ x + ls.K1[k] @ ls.lambda_star
    return policy
