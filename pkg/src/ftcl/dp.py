"""Differentiable dynamic-programming primitives.

Two sequence kernels built on the same machinery:

* an edit-distance-style accumulator over match/insert/delete residuals,
  made differentiable by replacing the branch max with a log-sum-exp
  relaxation, plus its exact reverse sweep;
* a thresholded soft longest-common-subsequence length with subgradients
  through the matched cells on the selected optimal path.

All operations are pure functions; results are plain arrays packaged in
frozen dataclasses and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

HARD = "hard"
NORMALIZED = "normalized"
PAPER_EXACT = "paper_exact"

_MODE_IDS = {
    HARD: _kernels.MODE_HARD,
    NORMALIZED: _kernels.MODE_NORMALIZED,
    PAPER_EXACT: _kernels.MODE_PAPER_EXACT,
}


@dataclass(frozen=True)
class SmoothMaxMode:
    """Branch-combiner selector: hard max, (1/gamma)*logsumexp(gamma*x)
    ("normalized", the default), or the un-normalized logsumexp(gamma*x)
    ("paper_exact").  gamma is the temperature and must be positive in the
    smooth variants; it is ignored in hard mode."""

    variant: str = NORMALIZED
    gamma: float = 10.0

    def __post_init__(self):
        if self.variant not in _MODE_IDS:
            raise ValueError(f"unknown smooth-max variant: {self.variant!r}")
        if self.variant != HARD and not self.gamma > 0:
            raise ValueError("gamma must be positive in smooth modes")

    @classmethod
    def hard(cls) -> "SmoothMaxMode":
        return cls(HARD, 1.0)

    @classmethod
    def normalized(cls, gamma: float = 10.0) -> "SmoothMaxMode":
        return cls(NORMALIZED, gamma)

    @classmethod
    def paper_exact(cls, gamma: float = 10.0) -> "SmoothMaxMode":
        return cls(PAPER_EXACT, gamma)

    @property
    def mode_id(self) -> int:
        return _MODE_IDS[self.variant]


def _check_values(values) -> np.ndarray:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input")
    return v


def smooth_max(values, mode: SmoothMaxMode) -> float:
    """Combine a vector of branch values into one scalar.

    Hard mode returns the exact max.  Normalized mode returns
    (1/gamma) * log(sum(exp(gamma * v))), which bounds the max from above by
    at most ln(n)/gamma.  Paper-exact mode drops the leading 1/gamma.  Both
    smooth variants subtract the max before exponentiating, so inputs up to
    |v| ~ 1e6 do not overflow.
    """
    v = _check_values(values)
    if mode.variant == HARD:
        return float(v.max())
    z = mode.gamma * v
    zm = z.max()
    lse = zm + np.log(np.exp(z - zm).sum())
    if mode.variant == NORMALIZED:
        return float(lse / mode.gamma)
    return float(lse)


def smooth_max_grad(values, mode: SmoothMaxMode) -> np.ndarray:
    """Derivative of :func:`smooth_max` w.r.t. its inputs.

    softmax(gamma * v) in normalized mode, gamma * softmax(gamma * v) in
    paper-exact mode (the un-normalized combiner scales gradients by gamma),
    and a one-hot subgradient at the first maximizer in hard mode.
    """
    v = _check_values(values)
    if mode.variant == HARD:
        out = np.zeros_like(v)
        out[int(np.argmax(v))] = 1.0
        return out
    z = mode.gamma * v
    z -= z.max()
    e = np.exp(z)
    w = e / e.sum()
    if mode.variant == PAPER_EXACT:
        return mode.gamma * w
    return w


@dataclass(frozen=True)
class FsdInputs:
    """Per-cell residuals for the edit-distance accumulator: match reward
    mu, insert penalty g, delete penalty h, all M x N."""

    mu: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        g = np.asarray(self.g, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if mu.ndim != 2 or mu.shape[0] < 1 or mu.shape[1] < 1:
            raise ValueError("residual matrices must be 2-D and non-empty")
        if g.shape != mu.shape or h.shape != mu.shape:
            raise ValueError("residual matrices must share one shape")
        for a in (mu, g, h):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite input")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)

    @property
    def shape(self):
        return self.mu.shape


@dataclass(frozen=True)
class FsdResult:
    """Forward-pass record: final score, full (M+1)x(N+1) table and the
    per-cell branch weights needed by the reverse sweep."""

    score: float
    table: np.ndarray
    branch_weights: np.ndarray | None
    mode: SmoothMaxMode = field(default_factory=SmoothMaxMode)


def fsd_forward(inputs: FsdInputs, mode: SmoothMaxMode) -> FsdResult:
    """Run the match/insert/delete recursion over the residuals.

    S(i,j) = mu[i,j] + combine(S(i-1,j-1), g[i,j]+S(i-1,j), h[i,j]+S(i,j-1))
    with zero borders, traversed row-major; the score is S(M, N).  In hard
    mode this equals the best accumulated residual over all monotone edit
    paths.
    """
    table, weights = _kernels.fsd_fill(
        inputs.mu, inputs.g, inputs.h, float(mode.gamma), mode.mode_id
    )
    return FsdResult(float(table[-1, -1]), table, weights, mode)


def fsd_backward(result: FsdResult, upstream: float) -> FsdInputs:
    """Gradients of upstream * score w.r.t. the three residual matrices.

    Adjoints start at the final cell and flow to each predecessor weighted
    by the branch derivatives recorded in the forward pass; the insert and
    delete residuals pick up their branch's share.  Hard mode yields the
    one-sided subgradient of the selected path.
    """
    if result.branch_weights is None:
        raise ValueError("result missing branch bookkeeping")
    dmu, dg, dh = _kernels.fsd_sweep(
        result.branch_weights, float(result.mode.gamma), result.mode.mode_id, float(upstream)
    )
    return FsdInputs(dmu, dg, dh)


@dataclass(frozen=True)
class LcsInputs:
    """Cosine-similarity matrix between two snippet sequences plus the
    match threshold tau; all similarities must lie in [-1, 1]."""

    sim: np.ndarray
    tau: float

    def __post_init__(self):
        sim = np.asarray(self.sim, dtype=float)
        if sim.ndim != 2 or sim.shape[0] < 1 or sim.shape[1] < 1:
            raise ValueError("similarity matrix must be 2-D and non-empty")
        if not np.all(np.isfinite(sim)):
            raise ValueError("non-finite input")
        if sim.min() < -1.0 or sim.max() > 1.0:
            raise ValueError("similarity out of range")
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [-1, 1]")
        object.__setattr__(self, "sim", sim)


@dataclass(frozen=True)
class LcsResult:
    """Soft common-subsequence length, the full table, the matched-cell
    mask and the traceback path as 1-based (i, j) pairs."""

    length: float
    table: np.ndarray
    match_mask: np.ndarray
    path: tuple


def _lcs_traceback(sim: np.ndarray, tau: float, table: np.ndarray) -> tuple:
    i, j = sim.shape
    path = []
    while i > 0 and j > 0:
        if sim[i - 1, j - 1] >= tau:
            path.append((i, j))
            i -= 1
            j -= 1
        elif table[i - 1, j] >= table[i, j - 1]:
            i -= 1
        else:
            j -= 1
    path.reverse()
    return tuple(path)


def lcs_forward(inputs: LcsInputs) -> LcsResult:
    """Accumulate the thresholded soft common-subsequence length.

    Matched cells (sim >= tau) extend the diagonal prefix by their
    similarity; other cells carry the larger of the up/left prefixes (hard
    max, up preferred on ties).  With similarities binarized to {0, 1} and
    tau = 0.5 the length equals the classic integer LCS.
    """
    table = _kernels.lcs_fill(inputs.sim, float(inputs.tau))
    path = _lcs_traceback(inputs.sim, float(inputs.tau), table)
    return LcsResult(
        float(table[-1, -1]), table, inputs.sim >= inputs.tau, path
    )


def lcs_backward(result: LcsResult, upstream: float) -> np.ndarray:
    """Subgradient of upstream * length w.r.t. the similarity matrix.

    The length depends linearly on the matched cells along the selected
    optimal path and is locally constant elsewhere, so the gradient is
    upstream at those cells and zero everywhere else (including every cell
    below the threshold).
    """
    grad = np.zeros(result.match_mask.shape)
    for i, j in result.path:
        grad[i - 1, j - 1] = upstream
    return grad
