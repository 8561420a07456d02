"""Sliding-window least-squares channel estimators and a sparse DCD solver.

All estimators share the regression model ``x(i) = sum_l h(i, l) s(i - l)``
(the convolution convention of :mod:`fduwa.channel`) and solve regularized
normal equations over a sliding window:

- ``srls_estimate``: trailing rectangular window, estimate assigned to the
  window end. Accurate for static channels, lags by ~M/2 on varying ones.
- ``srlsd_estimate``: same normal equations, estimate re-assigned to the
  window centre (delay T = floor(M/2)), which is where the windowed average
  of a drifting channel actually points.
- ``srls_l_estimate``: centred window with a bell weighting and a Legendre
  basis expansion of the tap trajectories; tap variation up to the basis
  order is captured exactly instead of averaged out.
- ``hsrls_l_dcd_estimate``: the same block system solved by the homotopy
  l1 DCD routine, exploiting sparsity of the expansion coefficients; the
  reweighting vector persists across window positions.

Estimates between solve positions are interpolated: linearly for the
rectangular-window estimators, through the basis expansion for the BEM
ones (the expansion is valid anywhere inside the window).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import linalg as sla

from .dsp import ComplexBaseband

__all__ = [
    "SlidingWindowConfig",
    "BemConfig",
    "HomotopyConfig",
    "EstimatorOutput",
    "legendre_basis",
    "srls_estimate",
    "srlsd_estimate",
    "srls_l_estimate",
    "h_l1_dcd_solve",
    "hsrls_l_dcd_estimate",
]


def _as_complex(x) -> np.ndarray:
    if isinstance(x, ComplexBaseband):
        x = x.samples
    return np.asarray(x, dtype=np.complex128)


@dataclass(frozen=True)
class SlidingWindowConfig:
    """Rectangular-window estimator geometry.

    ``delay`` is the re-assignment lag T: the window-end estimate is taken
    to describe instant ``i - T``. ``None`` means "the estimator's natural
    default" (0 for SRLS, floor(M/2) for SRLSd). ``stride`` spaces the solve
    positions; ``None`` picks ``max(1, M // 10)``.
    """

    filter_length: int
    window_length: int
    delay: int | None = None
    regularization: float = 0.0
    stride: int | None = None
    refresh_every: int = 1024

    def __post_init__(self):
        if self.filter_length < 1:
            raise ValueError("filter_length must be >= 1")
        if self.window_length % 2 == 0:
            raise ValueError("window_length must be odd")
        if self.window_length < self.filter_length:
            warnings.warn(
                "window shorter than the filter: normal equations are rank deficient",
                stacklevel=2,
            )
        if self.delay is not None and not 0 <= self.delay < self.window_length:
            raise ValueError("delay must lie in [0, window_length)")
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")

    def effective_stride(self) -> int:
        return self.stride if self.stride is not None else max(1, self.window_length // 10)


class _LegendreBasis:
    """Rows of (optionally orthogonalized) Legendre polynomials.

    Functions are represented by their Legendre-coefficient vectors so they
    can be evaluated at arbitrary points in [-1, 1], which is what the BEM
    interpolation between solve positions needs.
    """

    def __init__(self, order: int, window_length: int, weights=None, orthogonalize=False):
        if order < 0:
            raise ValueError("order must be >= 0")
        if window_length % 2 == 0:
            raise ValueError("window_length must be odd")
        self.order = order
        self.window_length = window_length
        self.half = (window_length - 1) // 2
        self.coef = np.eye(order + 1)
        if orthogonalize:
            if weights is None:
                weights = np.ones(window_length)
            grid = self.grid()
            rows = [npleg.legval(grid, self.coef[p]) for p in range(order + 1)]
            coef = self.coef.copy()
            for p in range(order + 1):
                for q in range(p):
                    proj = np.sum(weights * rows[p] * rows[q]) / np.sum(
                        weights * rows[q] * rows[q]
                    )
                    rows[p] = rows[p] - proj * rows[q]
                    coef[p] = coef[p] - proj * coef[q]
                scale = np.abs(npleg.legval(1.0, coef[p]))
                if scale > 0:
                    rows[p] = rows[p] / scale
                    coef[p] = coef[p] / scale
            self.coef = coef

    def grid(self) -> np.ndarray:
        """Normalized window abscissae k/M_o for k = -M_o..M_o."""
        if self.half == 0:
            return np.zeros(1)
        return np.arange(-self.half, self.half + 1) / self.half

    def sampled(self) -> np.ndarray:
        """(P+1, M) matrix of basis rows on the window grid."""
        return self.evaluate(self.grid())

    def evaluate(self, t) -> np.ndarray:
        """(P+1, len(t)) basis values at arbitrary normalized offsets."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.vstack([npleg.legval(t, self.coef[p]) for p in range(self.order + 1)])

    def at_zero(self) -> np.ndarray:
        return self.evaluate(0.0)[:, 0]


def legendre_basis(order: int, window_length: int, weights=None,
                   orthogonalize: bool = False) -> np.ndarray:
    """Basis rows p = 0..order sampled on k in [-M_o, M_o], scaled to [-1, 1]."""
    basis = _LegendreBasis(order, window_length, weights=weights,
                           orthogonalize=orthogonalize)
    return basis.sampled()


@dataclass(frozen=True)
class BemConfig:
    """Basis-expansion estimator geometry.

    ``window`` selects the bell weighting: "hann", "rect", or an explicit
    nonnegative symmetric array of length ``window_length``. The basis is
    orthogonalized under the window weighting by default: without it the
    weighted Legendre rows are correlated, and the sparse solver can absorb
    a tap's mean into higher-order functions, which extrapolates badly
    between solve positions.
    """

    filter_length: int
    order: int
    window_length: int
    window: object = "hann"
    orthogonalize: bool = True
    stride: int | None = None

    def __post_init__(self):
        if self.filter_length < 1:
            raise ValueError("filter_length must be >= 1")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.window_length % 2 == 0:
            raise ValueError("window_length must be odd")
        w = self.weights()
        if np.any(w < 0) or not np.allclose(w, w[::-1]):
            raise ValueError("window weights must be nonnegative and symmetric")

    @property
    def half(self) -> int:
        return (self.window_length - 1) // 2

    def weights(self) -> np.ndarray:
        if isinstance(self.window, str):
            if self.window == "hann":
                return np.hanning(self.window_length)
            if self.window == "rect":
                return np.ones(self.window_length)
            raise ValueError(f"unknown window {self.window!r}")
        w = np.asarray(self.window, dtype=float)
        if len(w) != self.window_length:
            raise ValueError("explicit window must have window_length entries")
        return w

    def basis(self) -> _LegendreBasis:
        return _LegendreBasis(self.order, self.window_length,
                              weights=self.weights(),
                              orthogonalize=self.orthogonalize)

    def effective_stride(self) -> int:
        stride = self.stride if self.stride is not None else max(1, self.window_length // 10)
        return min(stride, max(1, self.half))


@dataclass(frozen=True)
class HomotopyConfig:
    """Knobs of the homotopy l1 DCD solver.

    ``gamma`` shrinks the threshold per homotopy pass, ``mu_d`` is the
    debiasing prune level, ``mu_w`` the reweighting update rate.
    ``step_mode`` selects the refinement arithmetic: "pow2" is the classic
    multiplication-light ladder (initial step auto-scaled, halved
    ``ladder_levels`` times), "exact" uses closed-form coordinate
    soft-threshold steps. The final debias pass always uses exact steps.
    """

    gamma: float = 0.7
    mu_d: float = 0.05
    mu_w: float = 0.5
    outer_iterations: int = 16
    tau_min: float | None = None
    n_updates: int = 256
    ladder_levels: int = 8
    step_mode: str = "pow2"
    support_weight: float = 0.01

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.mu_d < 1:
            raise ValueError("mu_d must lie in (0, 1)")
        if not 0 < self.mu_w <= 1:
            raise ValueError("mu_w must lie in (0, 1]")
        if self.outer_iterations < 1:
            raise ValueError("outer_iterations must be >= 1")
        if self.step_mode not in ("pow2", "exact"):
            raise ValueError("step_mode must be 'pow2' or 'exact'")


@dataclass(frozen=True)
class EstimatorOutput:
    """Per-instant channel estimates plus solver bookkeeping."""

    h_hat: np.ndarray              # (N, L)
    solve_instants: np.ndarray     # instants the normal equations were solved at
    coeffs: np.ndarray | None      # (n_solves, P+1, L) expansion coefficients
    w_tilde: np.ndarray | None     # final reweighting vector
    residual_power: float


def _regressor_matrix(s: np.ndarray, L: int) -> np.ndarray:
    """A[i, l] = s(i - l); rows are the filter input vectors."""
    s_pad = np.concatenate([np.zeros(L - 1, dtype=np.complex128), s])
    windows = np.lib.stride_tricks.sliding_window_view(s_pad, L)
    return np.ascontiguousarray(windows[:, ::-1])


def _solve_hermitian(R: np.ndarray, b: np.ndarray, eps: float) -> np.ndarray:
    A = R if eps == 0 else R + eps * np.eye(len(R))
    c, low = sla.cho_factor(A, check_finite=False)
    return sla.cho_solve((c, low), b, check_finite=False)


def _interp_rows(n: int, instants: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of (n_solves, L) rows onto 0..n-1."""
    idx = np.arange(n, dtype=float)
    pos = np.clip(np.searchsorted(instants, idx, side="right") - 1, 0, len(instants) - 2) \
        if len(instants) > 1 else np.zeros(n, dtype=int)
    if len(instants) == 1:
        return np.broadcast_to(values[0], (n, values.shape[1])).copy()
    left = instants[pos].astype(float)
    right = instants[pos + 1].astype(float)
    frac = np.clip((idx - left) / np.maximum(right - left, 1), 0.0, 1.0)
    return values[pos] + frac[:, None] * (values[pos + 1] - values[pos])


def _residual_power(x, A, h_hat, lo, hi) -> float:
    predicted = np.einsum("il,il->i", h_hat[lo:hi], A[lo:hi])
    return float(np.mean(np.abs(x[lo:hi] - predicted) ** 2))


def srls_estimate(x, s, cfg: SlidingWindowConfig) -> EstimatorOutput:
    """Sliding-window RLS over a trailing rectangular window.

    Solves ``(R + eps I) h = b`` with R, b accumulated over the window
    [i - M + 1, i]; R and b are slid by block add/subtract updates with a
    periodic exact recompute to bound accumulation drift.
    """
    x = _as_complex(x)
    s = _as_complex(s)
    if len(x) != len(s):
        raise ValueError("desired and regressor streams must have equal length")
    M = cfg.window_length
    L = cfg.filter_length
    n = len(x)
    if n < M:
        raise ValueError(f"need at least window_length={M} samples, got {n}")
    delay = cfg.delay if cfg.delay is not None else 0

    A = _regressor_matrix(s, L)
    stride = cfg.effective_stride()
    ends = list(range(M - 1, n, stride))
    if ends[-1] != n - 1:
        ends.append(n - 1)
    ends = np.asarray(ends)

    solutions = np.empty((len(ends), L), dtype=np.complex128)
    R = None
    rhs = None
    prev_end = None
    since_refresh = 0
    for j, i in enumerate(ends):
        if R is None or since_refresh >= cfg.refresh_every:
            G = A[i - M + 1 : i + 1]
            R = G.conj().T @ G
            rhs = G.conj().T @ x[i - M + 1 : i + 1]
            since_refresh = 0
        else:
            step = i - prev_end
            Gn = A[prev_end + 1 : i + 1]
            Go = A[prev_end - M + 1 : i - M + 1]
            R += Gn.conj().T @ Gn - Go.conj().T @ Go
            rhs += Gn.conj().T @ x[prev_end + 1 : i + 1]
            rhs -= Go.conj().T @ x[prev_end - M + 1 : i - M + 1]
            since_refresh += step
        solutions[j] = _solve_hermitian(R, rhs, cfg.regularization)
        prev_end = i

    assigned = ends - delay
    h_hat = _interp_rows(n, assigned, solutions)
    res = _residual_power(x, A, h_hat, int(assigned[0]), int(assigned[-1]) + 1)
    return EstimatorOutput(
        h_hat=h_hat,
        solve_instants=assigned,
        coeffs=None,
        w_tilde=None,
        residual_power=res,
    )


def srlsd_estimate(x, s, cfg: SlidingWindowConfig) -> EstimatorOutput:
    """Delayed SRLS: the window estimate describes the window centre.

    Identical normal equations; the estimate at window end i is assigned to
    instant i - T with T = floor(M/2) (unless cfg.delay overrides it).
    """
    delay = cfg.delay if cfg.delay is not None else cfg.window_length // 2
    return srls_estimate(x, s, replace(cfg, delay=delay))


def _bem_normal_equations(A, x, weights, basis_rows, center, half):
    """Stacked weighted system at one window centre.

    Returns (R, b) of the block system over coefficients c = [c_0; ..; c_P],
    where block p carries sqrt(w(k)) phi_p(k) weighted regressor rows.
    """
    lo, hi = center - half, center + half + 1
    G = A[lo:hi]
    sqw = np.sqrt(weights)
    blocks = [(sqw * basis_rows[p])[:, None] * G for p in range(basis_rows.shape[0])]
    stacked = np.hstack(blocks)
    R = stacked.conj().T @ stacked
    b = stacked.conj().T @ (sqw * x[lo:hi])
    return R, b


def _bem_centers(n: int, half: int, stride: int) -> np.ndarray:
    first, last = half, n - 1 - half
    if last < first:
        raise ValueError("signal shorter than the window")
    centers = list(range(first, last + 1, stride))
    if centers[-1] != last:
        centers.append(last)
    return np.asarray(centers)


def _bem_fill(n, centers, coeffs, basis: _LegendreBasis) -> np.ndarray:
    """Evaluate the expansion around each centre out to the segment midpoints."""
    L = coeffs.shape[2]
    h_hat = np.empty((n, L), dtype=np.complex128)
    bounds = [0]
    for a, b in zip(centers[:-1], centers[1:]):
        bounds.append((a + b + 1) // 2)
    bounds.append(n)
    half = max(basis.half, 1)
    for j, c in enumerate(centers):
        lo, hi = bounds[j], bounds[j + 1]
        t = (np.arange(lo, hi) - c) / half
        phi = basis.evaluate(t)                      # (P+1, seg)
        h_hat[lo:hi] = np.einsum("pl,ps->sl", coeffs[j], phi)
    return h_hat


def srls_l_estimate(x, s, bem: BemConfig, eps: float = 0.0) -> EstimatorOutput:
    """Basis-expansion sliding-window estimator (quadratic solver).

    Per window centre i: build b_p and the block matrices R_{p,q} from the
    bell-weighted regressor rows, solve the (P+1)L system, and report
    ``h(i) = sum_p c_p phi_p(0)``. Between solve positions the expansion
    itself provides the estimate.
    """
    x = _as_complex(x)
    s = _as_complex(s)
    if len(x) != len(s):
        raise ValueError("desired and regressor streams must have equal length")
    n = len(x)
    if n < bem.window_length:
        raise ValueError(f"need at least window_length={bem.window_length} samples")
    L = bem.filter_length
    basis = bem.basis()
    rows = basis.sampled()
    weights = bem.weights()
    A = _regressor_matrix(s, L)
    centers = _bem_centers(n, bem.half, bem.effective_stride())

    coeffs = np.empty((len(centers), bem.order + 1, L), dtype=np.complex128)
    for j, c in enumerate(centers):
        R, b = _bem_normal_equations(A, x, weights, rows, c, bem.half)
        sol = _solve_hermitian(R, b, eps)
        coeffs[j] = sol.reshape(bem.order + 1, L)

    h_hat = _bem_fill(n, centers, coeffs, basis)
    res = _residual_power(x, A, h_hat, int(centers[0]), int(centers[-1]) + 1)
    return EstimatorOutput(
        h_hat=h_hat,
        solve_instants=centers,
        coeffs=coeffs,
        w_tilde=None,
        residual_power=res,
    )


def _dcd_refine(R, diag, beta, c, active, tau_w, cfg: HomotopyConfig,
                exact: bool = False, n_updates: int | None = None) -> None:
    """Leading coordinate descent on the active support (in place).

    Minimizes 0.5 c'Rc - Re(b'c) + sum tau_w |c| restricted to the support.
    ``beta`` tracks the residual correlation b - Rc throughout.
    """
    idx = np.flatnonzero(active)
    if len(idx) == 0:
        return
    budget = cfg.n_updates if n_updates is None else n_updates
    d_idx = diag[idx]
    use_exact = exact or cfg.step_mode == "exact"

    if use_exact:
        for _ in range(budget):
            u = c[idx] + beta[idx] / d_idx
            mag = np.abs(u)
            thr = tau_w[idx] / d_idx
            shrink = np.maximum(1.0 - thr / np.maximum(mag, 1e-300), 0.0)
            d = u * shrink - c[idx]
            gain = d_idx * np.abs(d) ** 2
            j = int(np.argmax(gain))
            if gain[j] <= 1e-28 * (1.0 + np.max(np.abs(c[idx])) ** 2 * np.max(d_idx)):
                break
            k = idx[j]
            c[k] += d[j]
            beta -= d[j] * R[:, k]
        return

    # power-of-two ladder: exact objective change for axis moves +-alpha, +-j*alpha
    scale = np.max(np.abs(c[idx] + beta[idx] / d_idx))
    if scale <= 0:
        return
    alpha = 2.0 ** np.ceil(np.log2(scale))
    dirs = np.array([1.0, -1.0, 1j, -1j])
    level = 0
    updates = 0
    while updates < budget and level < cfg.ladder_levels:
        cd = c[idx]
        # (n_active, 4) objective change for each axis move
        quad = 0.5 * alpha**2 * d_idx[:, None]
        lin = -alpha * np.real(np.conj(dirs)[None, :] * beta[idx][:, None])
        pen = tau_w[idx][:, None] * (np.abs(cd[:, None] + alpha * dirs[None, :]) - np.abs(cd)[:, None])
        df = quad + lin + pen
        j, m = np.unravel_index(int(np.argmin(df)), df.shape)
        if df[j, m] < -1e-300:
            k = idx[j]
            step = alpha * dirs[m]
            c[k] += step
            beta -= step * R[:, k]
            updates += 1
        else:
            alpha *= 0.5
            level += 1


def h_l1_dcd_solve(R, b, hcfg: HomotopyConfig, w_tilde=None,
                   c_init=None) -> tuple[np.ndarray, np.ndarray]:
    """Homotopy l1 solver with DCD refinement on the active support.

    Starting from the peak residual correlation tau = max|b - Rc|, each
    pass may remove one support element (if zeroing it lowers the penalized
    objective), include the best thresholded candidate, shrink tau by
    gamma, and refine the support by leading DCD. Afterwards the support is
    debiased (prune at mu_d of the peak, re-fit without penalty) and the
    reweighting vector is relaxed toward small weights on the support.

    ``c_init`` warm-starts the solution (the sliding-window estimator
    passes the previous window's coefficients, so only support *changes*
    consume the per-call inclusion budget).

    Returns (coefficients, updated reweighting vector).
    """
    R = np.asarray(R, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    n = len(b)
    if R.shape != (n, n):
        raise ValueError("R must be square and match b")
    if not np.allclose(R, R.conj().T, rtol=1e-8, atol=1e-10 * max(1.0, float(np.abs(R).max()))):
        raise ValueError("R must be Hermitian")

    diag = np.real(np.diag(R)).copy()
    usable = diag > 0
    w = np.ones(n) if w_tilde is None else np.asarray(w_tilde, dtype=float).copy()
    if c_init is None:
        c = np.zeros(n, dtype=np.complex128)
        beta = b.copy()
    else:
        c = np.asarray(c_init, dtype=np.complex128).copy()
        beta = b - R @ c
    active = np.abs(c) > 0

    tau = float(np.max(np.abs(beta))) if n else 0.0
    if tau > 0:
        for _ in range(hcfg.outer_iterations):
            # removal: zero the element whose removal lowers the objective most
            idx = np.flatnonzero(active)
            if len(idx):
                q = (
                    0.5 * np.abs(c[idx]) ** 2 * diag[idx]
                    + np.real(np.conj(c[idx]) * beta[idx])
                    - tau * w[idx] * np.abs(c[idx])
                )
                j = int(np.argmin(q))
                if q[j] < 0:
                    k = idx[j]
                    beta += c[k] * R[:, k]
                    c[k] = 0
                    active[k] = False
            # inclusion: best candidate clearing the weighted threshold
            cand = ~active & usable
            if np.any(cand):
                idx = np.flatnonzero(cand)
                excess = np.abs(beta[idx]) - tau * w[idx]
                ok = excess > 0
                if np.any(ok):
                    score = np.where(ok, excess**2 / diag[idx], -np.inf)
                    active[idx[int(np.argmax(score))]] = True
            tau *= hcfg.gamma
            _dcd_refine(R, diag, beta, c, active, tau * w, hcfg)
            if hcfg.tau_min is not None and tau < hcfg.tau_min:
                break

        # debiasing: prune small coefficients, re-fit the survivors unpenalized
        if np.any(active):
            cmax = float(np.max(np.abs(c[active]))) if np.any(c[active]) else 0.0
            drop = active & (np.abs(c) <= hcfg.mu_d * cmax)
            if np.any(drop):
                beta += R[:, drop] @ c[drop]
                c[drop] = 0
                active &= ~drop
            _dcd_refine(
                R, diag, beta, c, active, np.zeros(n), hcfg,
                exact=True, n_updates=max(hcfg.n_updates, 64 * int(np.sum(active))),
            )

    w_bar = np.ones(n)
    w_bar[active & (np.abs(c) > 0)] = hcfg.support_weight
    w_new = (1.0 - hcfg.mu_w) * w + hcfg.mu_w * w_bar
    return c, w_new


def hsrls_l_dcd_estimate(x, s, bem: BemConfig, hcfg: HomotopyConfig) -> EstimatorOutput:
    """Sparse basis-expansion estimator.

    Same block system as :func:`srls_l_estimate`, solved by
    :func:`h_l1_dcd_solve`; the reweighting vector carries across window
    positions so established support enters later solves almost for free.
    """
    x = _as_complex(x)
    s = _as_complex(s)
    if len(x) != len(s):
        raise ValueError("desired and regressor streams must have equal length")
    n = len(x)
    if n < bem.window_length:
        raise ValueError(f"need at least window_length={bem.window_length} samples")
    L = bem.filter_length
    basis = bem.basis()
    rows = basis.sampled()
    weights = bem.weights()
    A = _regressor_matrix(s, L)
    centers = _bem_centers(n, bem.half, bem.effective_stride())

    coeffs = np.empty((len(centers), bem.order + 1, L), dtype=np.complex128)
    w_tilde = None
    warm = None
    for j, cpos in enumerate(centers):
        R, b = _bem_normal_equations(A, x, weights, rows, cpos, bem.half)
        if j == 0:
            # double-solve the first window so the record head sees warmed
            # reweighting/support state like every later position
            warm, w_tilde = h_l1_dcd_solve(R, b, hcfg)
        sol, w_tilde = h_l1_dcd_solve(R, b, hcfg, w_tilde=w_tilde, c_init=warm)
        warm = sol
        coeffs[j] = sol.reshape(bem.order + 1, L)

    h_hat = _bem_fill(n, centers, coeffs, basis)
    res = _residual_power(x, A, h_hat, int(centers[0]), int(centers[-1]) + 1)
    return EstimatorOutput(
        h_hat=h_hat,
        solve_instants=centers,
        coeffs=coeffs,
        w_tilde=w_tilde,
        residual_power=res,
    )
