"""Maximum-likelihood estimation of the rule-to-consequent probability matrix.

The conditional output density is the mixture

    p(y | h) = sum_j N_j(y) sum_i phi_i(h) P[i, j],
    N_j(y)   = exp(-(y - w_j)^2 / sigma_B_j^2) / (sqrt(pi) sigma_B_j),

and the log-likelihood over the training set is maximized over row-stochastic
``P`` by projected gradient ascent. The free parameters are the first K-1
columns; the last column is ``1 - row sum``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-300
SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class LikelihoodContext:
    phi: np.ndarray       # (N, K) firing strengths
    Y: np.ndarray         # (N,)
    centers: np.ndarray   # (K,) consequent centres (= W)
    sigma_B: np.ndarray   # (K,)

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        Y = np.asarray(self.Y, dtype=float).ravel()
        c = np.asarray(self.centers, dtype=float).ravel()
        s = np.asarray(self.sigma_B, dtype=float).ravel()
        N, K = phi.shape
        if Y.size != N or c.size != K or s.size != K:
            raise DataError("likelihood context shapes disagree")
        if np.any(s <= 0):
            raise ConfigError("consequent widths must be positive")
        for name, v in (("phi", phi), ("Y", Y), ("centers", c), ("sigma_B", s)):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "_B", y_given_B(Y[:, None], c[None, :], s[None, :]))

    @property
    def K(self):
        return self.phi.shape[1]

    @property
    def B(self) -> np.ndarray:
        """(N, K) matrix of consequent densities at the targets."""
        return self._B


@dataclass(frozen=True)
class OptimizeOptions:
    max_iters: int = 500
    grad_tol: float = 1e-6
    rel_tol: float = 1e-9
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    verbose: bool = False


@dataclass
class OptimizeResult:
    P: np.ndarray
    loglik: float
    loglik_init: float
    iterations: int
    reason: str
    trace: list = field(default_factory=list)


def y_given_B(y, c, sigma):
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ConfigError("consequent width must be positive")
    return np.exp(-((np.asarray(y, dtype=float) - c) ** 2) / sigma ** 2) / (SQRT_PI * sigma)


def y_density(y, phi, P, centers, sigma_B):
    """Mixture density ``p(y | h)`` for a single firing vector ``phi``.

    ``y`` may be an array of evaluation points.
    """
    q = np.asarray(phi, dtype=float) @ np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    return y_given_B(y[..., None], centers, sigma_B) @ q


def full_P(Pv) -> np.ndarray:
    Pv = np.atleast_2d(np.asarray(Pv, dtype=float))
    return np.column_stack([Pv, 1.0 - Pv.sum(axis=1)])


def free_block(P) -> np.ndarray:
    return np.asarray(P, dtype=float)[:, :-1].copy()


def sample_densities(ctx: LikelihoodContext, P) -> np.ndarray:
    return np.einsum("nk,kj,nj->n", ctx.phi, np.asarray(P, dtype=float), ctx.B)


def log_likelihood(ctx: LikelihoodContext, P) -> float:
    p = sample_densities(ctx, P)
    return float(np.sum(np.log(np.maximum(p, DENSITY_FLOOR))))


def grad_log_likelihood(ctx: LikelihoodContext, P) -> np.ndarray:
    """Gradient w.r.t. the free block ``P[:, :K-1]``."""
    K = ctx.K
    p = sample_densities(ctx, P)
    live = p > DENSITY_FLOOR
    w = np.where(live, 1.0 / np.where(live, p, 1.0), 0.0)
    D = ctx.B[:, :K - 1] - ctx.B[:, K - 1:K]
    return ctx.phi.T @ (D * w[:, None])


def project_capped_simplex(v) -> np.ndarray:
    """Euclidean projection of each row onto ``{x >= 0, sum(x) <= 1}``."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    out = np.maximum(v, 0.0)
    over = out.sum(axis=1) > 1.0
    if over.any():
        out[over] = project_simplex(v[over])
    return out


def project_simplex(v) -> np.ndarray:
    """Row-wise projection onto the probability simplex (sort-based)."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def projected_gradient_norm(ctx: LikelihoodContext, Pv) -> float:
    g = grad_log_likelihood(ctx, full_P(Pv))
    return float(np.linalg.norm(project_capped_simplex(Pv + g) - Pv))


def optimize_P(ctx: LikelihoodContext, init_P=None, opts: OptimizeOptions | None = None,
               trace_sink=None) -> OptimizeResult:
    """Projected gradient ascent with Armijo backtracking.

    The result never has a lower log-likelihood than the (projected) start.
    ``trace_sink(record)`` receives one dict per iteration when given.
    """
    opts = opts or OptimizeOptions()
    K = ctx.K
    if init_P is None:
        init_P = np.eye(K)
    init_P = np.atleast_2d(np.asarray(init_P, dtype=float))
    if init_P.shape != (K, K):
        raise DataError(f"initial P has shape {init_P.shape}, expected {(K, K)}")
    if K == 1:
        L = log_likelihood(ctx, np.ones((1, 1)))
        return OptimizeResult(np.ones((1, 1)), L, L, 0, "trivial")
    x = project_capped_simplex(free_block(init_P))
    L = log_likelihood(ctx, full_P(x))
    L0 = L
    trace = []
    reason = "max_iters"
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = grad_log_likelihood(ctx, full_P(x))
        pg = float(np.linalg.norm(project_capped_simplex(x + g) - x))
        if pg < opts.grad_tol:
            reason = "gradient"
            it -= 1
            break
        step = opts.step0
        accepted = False
        for _ in range(opts.max_backtracks):
            cand = project_capped_simplex(x + step * g)
            Lc = log_likelihood(ctx, full_P(cand))
            if Lc >= L + opts.armijo * float(np.sum(g * (cand - x))):
                accepted = True
                break
            step *= opts.shrink
        if not accepted or Lc < L:
            reason = "line_search"
            it -= 1
            break
        improvement = Lc - L
        x, L = cand, Lc
        rec = {"iteration": it, "loglik": L, "step": step, "proj_norm": pg}
        trace.append(rec)
        if trace_sink:
            trace_sink(rec)
        if opts.verbose:
            log.info("iter %d L=%.10g step=%.3g |pg|=%.3g", it, L, step, pg)
        if improvement <= opts.rel_tol * max(abs(L), 1.0):
            reason = "relative_improvement"
            break
    P = full_P(x)
    # clean tiny negative round-off in the reconstructed column
    P = np.maximum(P, 0.0)
    P /= P.sum(axis=1, keepdims=True)
    Lf = log_likelihood(ctx, P)
    return OptimizeResult(P, Lf, L0, it, reason, trace)


def consequent_widths(Y, labels, K: int, floor: float = 0.02) -> np.ndarray:
    """Per-cluster standard deviation of the targets, floored."""
    Y = np.asarray(Y, dtype=float).ravel()
    labels = np.asarray(labels, dtype=int).ravel()
    out = np.full(K, floor)
    for j in range(K):
        yj = Y[labels == j]
        if yj.size > 1:
            out[j] = max(float(yj.std()), floor)
    return out
