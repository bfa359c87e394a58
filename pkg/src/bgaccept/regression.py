"""Boundary learners mapping risks (sigma_p, mu_n, sigma_n) to compensation mu_p.

Linear quantile regression, distorted least squares, and Gaussian-process
regression whose coefficients can be re-optimised against a quantile or a
distorted objective with the kernel hyperparameters frozen.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize, sparse
from scipy.special import expit

from .distortion import MinMaxVar, _check_side, rank_weights
from .errors import ConvergenceError, NumericalError, ValidationError

SMOOTHING_ALPHA = 1e-4
MAX_ITER = 5000
DLS_TOL = 1e-10
DLS_DAMPING = 0.5
GPR_RESTARTS = 8
ANNEAL_FACTOR = 3.0


@dataclass(frozen=True)
class QuantileLevel:
    tau: float

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValidationError("quantile level must lie strictly in (0, 1)")


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.targets, dtype=float).ravel()
        if x.shape[0] != y.size:
            raise ValidationError("inputs and targets disagree on the number of rows")
        n, d = x.shape
        if n < d + 1:
            raise ValidationError(f"need at least d+1={d + 1} rows, got {n}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains non-finite entries")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def d(self):
        return self.inputs.shape[1]


@dataclass(frozen=True)
class LinearBoundary:
    intercept: float
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float).ravel())


@dataclass(frozen=True)
class GprBoundary:
    """Posterior-mean regressor ``intercept + linear_part.x + sum_i w_i k(x_i, x)``.

    The squared-exponential kernel acts on standardised inputs
    ``(x - input_mean) / input_scale``; lengthscales are in those units.
    """

    kernel_lengthscales: np.ndarray
    kernel_amplitude: float
    noise_variance: float
    training_inputs: np.ndarray
    weights: np.ndarray
    intercept: float
    linear_part: np.ndarray
    input_mean: np.ndarray
    input_scale: np.ndarray
    log_marginal_likelihood: float = field(default=float("nan"), compare=False)

    def standardize(self, x):
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.input_mean) / self.input_scale


@dataclass(frozen=True)
class QuantileObjective:
    tau: float
    alpha: float = SMOOTHING_ALPHA

    def __post_init__(self):
        QuantileLevel(self.tau)
        if not self.alpha > 0:
            raise ValidationError("smoothing alpha must be positive")


@dataclass(frozen=True)
class DistortedObjective:
    distortion: MinMaxVar
    side: str

    def __post_init__(self):
        _check_side(self.side)


# ---------------------------------------------------------------- losses


def _tau(tau):
    return tau.tau if isinstance(tau, QuantileLevel) else QuantileLevel(float(tau)).tau


def pinball_loss(residuals, tau) -> float:
    """``(1-tau) sum r+ + tau sum r-`` with ``r = fitted - observed``.

    With that sign convention minimising the loss puts a fraction ``tau``
    of the targets below the fit, i.e. it estimates the tau-quantile.
    """
    t = _tau(tau)
    r = np.asarray(residuals, dtype=float)
    return float((1.0 - t) * np.sum(np.maximum(r, 0.0)) + t * np.sum(np.maximum(-r, 0.0)))


def smoothed_pinball(x, tau, alpha=SMOOTHING_ALPHA):
    """``tau x + alpha log(1 + exp(-x/alpha))`` for ``x = observed - fitted``.

    Convex, within ``alpha log 2`` of the check function ``x (tau - 1{x<0})``.
    """
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    t = _tau(tau)
    x = np.asarray(x, dtype=float)
    out = t * x + alpha * np.logaddexp(0.0, -x / alpha)
    return float(out) if out.ndim == 0 else out


def smoothed_pinball_grad(x, tau, alpha=SMOOTHING_ALPHA):
    t = _tau(tau)
    return t - expit(-np.asarray(x, dtype=float) / alpha)


# ---------------------------------------------------------------- linear fits


def _design(x):
    return np.column_stack([np.ones(x.shape[0]), x])


def fit_quantile_linear(d: Dataset, tau) -> LinearBoundary:
    """Affine tau-quantile regression solved exactly as a linear program.

    Variables ``(beta, u+, u-)`` with ``y - X beta = u+ - u-``; minimise
    ``tau sum u+ + (1-tau) sum u-``. The vertex is then polished by an exact
    solve through the interpolated rows.
    """
    t = _tau(tau)
    n, dim = d.n, d.d
    X = _design(d.inputs)
    eye = sparse.identity(n, format="csr")
    a_eq = sparse.hstack([sparse.csr_matrix(X), eye, -eye], format="csr")
    cost = np.concatenate([np.zeros(dim + 1), np.full(n, t), np.full(n, 1.0 - t)])
    bounds = [(None, None)] * (dim + 1) + [(0, None)] * (2 * n)
    res = optimize.linprog(
        cost, A_eq=a_eq, b_eq=d.targets, bounds=bounds, method="highs",
        options={"maxiter": 100 * MAX_ITER},
    )
    if res.status != 0:
        raise ConvergenceError(f"quantile regression LP failed: {res.message}")
    beta = res.x[: dim + 1]
    beta = _polish_quantile(X, d.targets, beta, t)
    return LinearBoundary(intercept=float(beta[0]), coefficients=beta[1:])


def _polish_quantile(X, y, beta, t):
    r = X @ beta - y
    scale = 1.0 + np.abs(y)
    exact = np.abs(r) <= 1e-7 * scale
    if exact.sum() < X.shape[1] or np.linalg.matrix_rank(X[exact]) < X.shape[1]:
        return beta
    refit, *_ = np.linalg.lstsq(X[exact], y[exact], rcond=None)
    before = pinball_loss(r, t)
    after = pinball_loss(X @ refit - y, t)
    return refit if after <= before * (1 + 1e-12) + 1e-15 else beta


def _wls(X, y, w):
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return beta


def distorted_weights(residuals, dist: MinMaxVar, side):
    """Probability weights attached to residuals through their ranks."""
    r = np.asarray(residuals, dtype=float)
    order = np.argsort(r, kind="stable")
    w = np.empty(r.size)
    w[order] = rank_weights(r.size, dist, side)
    return w


def _rank_reweight(solve, residuals_of, n, dist, side, damping, tol, scale, max_iter):
    """Fixed-point iteration shared by the distorted fits.

    ``solve(w)`` returns the weighted fit (a flat parameter vector) and
    ``residuals_of(params)`` its residuals. New rank weights are blended in
    with fraction ``1 - damping``; the fraction halves every time the
    parameter step reverses direction, which damps the chattering caused by
    residual ties at the solution.
    """
    w = np.full(n, 1.0 / n)
    params = solve(w)
    frac = 1.0 - damping
    prev_step = None
    for _ in range(max_iter):
        w = frac * distorted_weights(residuals_of(params), dist, side) + (1.0 - frac) * w
        new_params = solve(w)
        step = new_params - params
        params = new_params
        if np.max(np.abs(step)) < tol * scale(params):
            return params, w
        if prev_step is not None and step @ prev_step < 0:
            frac *= 0.5
        prev_step = step
    raise ConvergenceError(f"distorted fit did not settle in {max_iter} rounds")


def fit_distorted_ls(
    d: Dataset, dist: MinMaxVar, side, damping=DLS_DAMPING, tol=DLS_TOL, max_iter=MAX_ITER
) -> LinearBoundary:
    """Minimise ``sum_i r_i^2 w_i`` with rank-dependent distortion weights.

    Residual ranks move with the fit, so the weights are recomputed from the
    current residuals ``y - f`` each round and blended in until the
    coefficients change by less than ``tol``.
    """
    _check_side(side)
    X = _design(d.inputs)
    y = d.targets
    beta, _ = _rank_reweight(
        lambda w: _wls(X, y, w), lambda b: y - X @ b, d.n, dist, side, damping, tol,
        lambda b: max(1.0, float(np.max(np.abs(b)))), max_iter,
    )
    return LinearBoundary(intercept=float(beta[0]), coefficients=beta[1:])


# ---------------------------------------------------------------- GPR


def se_kernel(za, zb, lengthscales, amplitude):
    """Squared-exponential kernel matrix between standardised input sets."""
    a = np.atleast_2d(za) / lengthscales
    b = np.atleast_2d(zb) / lengthscales
    sq = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return amplitude * np.exp(-0.5 * np.maximum(sq, 0.0))


def _cholesky(a):
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            "kernel matrix plus noise is not positive definite (degenerate lengthscales?)"
        ) from exc


def _standardization(x):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def gpr_from_hyperparameters(
    inputs, targets, lengthscales, amplitude, noise_variance, mean="linear",
    input_mean=None, input_scale=None,
) -> GprBoundary:
    """Condition a GP with fixed hyperparameters on ``(inputs, targets)``.

    ``mean="linear"`` estimates intercept and slope by generalised least
    squares under the GP covariance; ``mean="zero"`` keeps the prior mean
    at zero, giving the textbook ``k*^T (K + s^2 I)^-1 y`` predictor.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if input_mean is None or input_scale is None:
        input_mean, input_scale = _standardization(x)
    z = (x - input_mean) / input_scale
    ls = np.broadcast_to(np.asarray(lengthscales, dtype=float), (x.shape[1],)).copy()
    if np.any(ls <= 0) or amplitude <= 0 or noise_variance < 0:
        raise ValidationError("kernel hyperparameters must be positive (noise >= 0)")
    K = se_kernel(z, z, ls, amplitude)
    chol = _cholesky(K + noise_variance * np.eye(x.shape[0]))
    if mean == "linear":
        H = _design(x)
        a_inv_h = linalg.cho_solve((chol, True), H)
        a_inv_y = linalg.cho_solve((chol, True), y)
        theta = np.linalg.solve(H.T @ a_inv_h, H.T @ a_inv_y)
        resid = y - H @ theta
        intercept, linear = float(theta[0]), theta[1:]
    elif mean == "zero":
        resid = y
        intercept, linear = 0.0, np.zeros(x.shape[1])
    else:
        raise ValidationError("mean must be 'linear' or 'zero'")
    weights = linalg.cho_solve((chol, True), resid)
    return GprBoundary(
        kernel_lengthscales=ls,
        kernel_amplitude=float(amplitude),
        noise_variance=float(noise_variance),
        training_inputs=x,
        weights=weights,
        intercept=intercept,
        linear_part=np.asarray(linear, dtype=float),
        input_mean=np.asarray(input_mean, dtype=float),
        input_scale=np.asarray(input_scale, dtype=float),
    )


def _neg_log_marginal(log_params, z, y, sq_dists, fixed_noise):
    dim = z.shape[1]
    ls = np.exp(log_params[:dim])
    amp = math.exp(log_params[dim])
    noise = fixed_noise if fixed_noise is not None else math.exp(log_params[dim + 1])
    scaled = np.exp(-0.5 * np.tensordot(sq_dists, 1.0 / ls**2, axes=([2], [0])))
    K = amp * scaled
    n = y.size
    try:
        chol = linalg.cholesky(K + (noise + 1e-10 * amp) * np.eye(n), lower=True)
    except linalg.LinAlgError:
        return 1e25, np.zeros_like(log_params)
    alpha = linalg.cho_solve((chol, True), y)
    nll = 0.5 * y @ alpha + np.sum(np.log(np.diag(chol))) + 0.5 * n * math.log(2 * math.pi)
    inner = np.outer(alpha, alpha) - linalg.cho_solve((chol, True), np.eye(n))
    grad = np.empty_like(log_params)
    for j in range(dim):
        dk = K * sq_dists[:, :, j] / ls[j] ** 2
        grad[j] = -0.5 * np.sum(inner * dk)
    grad[dim] = -0.5 * np.sum(inner * K)
    if fixed_noise is None:
        grad[dim + 1] = -0.5 * noise * np.trace(inner)
    return nll, grad


def fit_gpr(
    d: Dataset, seed=0, restarts=GPR_RESTARTS, noise_variance=None, mean="linear"
) -> GprBoundary:
    """Squared-exponential GPR with hyperparameters from the marginal likelihood.

    Inputs are standardised; targets are detrended by ordinary least squares
    and scaled to unit variance for the search. ``restarts`` L-BFGS runs
    start from log-uniform lengthscales in [1e-2, 1e1]; the best objective
    wins, ties going to the earliest restart. A fixed ``noise_variance`` (in
    target units) skips the noise search.
    """
    if d.n > 10_000:
        raise ValidationError("dense GPR is limited to n <= 10^4")
    rng = np.random.default_rng(seed)
    x, y = d.inputs, d.targets
    x_mean, x_scale = _standardization(x)
    z = (x - x_mean) / x_scale
    H = _design(x)
    if mean == "linear":
        ols, *_ = np.linalg.lstsq(H, y, rcond=None)
        detrended = y - H @ ols
    else:
        detrended = y.copy()
    y_scale = float(np.std(detrended)) or 1.0
    ys = detrended / y_scale
    fixed = None if noise_variance is None else float(noise_variance) / y_scale**2
    diff = z[:, None, :] - z[None, :, :]
    sq_dists = diff * diff

    dim = d.d
    bounds = [(math.log(1e-3), math.log(1e3))] * dim + [(math.log(1e-6), math.log(1e4))]
    if fixed is None:
        bounds.append((math.log(1e-10), math.log(10.0)))
    best = None
    for k in range(restarts):
        start = list(np.log(10.0 ** rng.uniform(-2.0, 1.0, size=dim))) + [0.0]
        if fixed is None:
            start.append(math.log(0.1))
        res = optimize.minimize(
            _neg_log_marginal, np.array(start), args=(z, ys, sq_dists, fixed), jac=True,
            method="L-BFGS-B", bounds=bounds, options={"maxiter": 500},
        )
        if best is None or res.fun < best[0]:
            best = (float(res.fun), res.x, k)
    nll, params, _ = best
    ls = np.exp(params[:dim])
    amp = math.exp(params[dim]) * y_scale**2
    noise = float(noise_variance) if fixed is not None else math.exp(params[dim + 1]) * y_scale**2
    model = gpr_from_hyperparameters(x, y, ls, amp, noise, mean=mean, input_mean=x_mean, input_scale=x_scale)
    return replace(model, log_marginal_likelihood=-nll)


def _training_kernel(g: GprBoundary):
    z = g.standardize(g.training_inputs)
    return se_kernel(z, z, g.kernel_lengthscales, g.kernel_amplitude)


def _noise_floor(g: GprBoundary, y):
    return max(g.noise_variance, (1e-6 * (float(np.std(y)) or 1.0)) ** 2)


def adjust_gpr_coefficients(g: GprBoundary, d: Dataset, objective) -> GprBoundary:
    """Re-fit intercept, linear part and representer weights; kernel frozen.

    Quantile objective: minimise
    ``sum_i S_tau(y_i - f_i) / s + 1/2 w^T K w`` with the smoothed pinball
    ``S_tau``, where ``s = sigma_eps tau (1-tau) / sqrt(1 - 2 tau + 2 tau^2)``
    is the asymmetric-Laplace scale whose variance matches the fitted
    noise. Solved by L-BFGS in whitened coordinates ``v = L^T w``, with
    the smoothing width annealed down to ``objective.alpha``.

    Distorted objective: minimise
    ``n / (2 sigma_eps^2) sum_i omega_i r_i^2 + 1/2 w^T K w`` where the
    ``omega_i`` are the rank weights of the residuals, iterated to a fixed
    point as in ``fit_distorted_ls``. Uniform weights give back the
    plain GP posterior mean.
    """
    if not np.array_equal(np.asarray(d.inputs), g.training_inputs):
        raise ValidationError("adjustment must use the GPR training inputs")
    if isinstance(objective, QuantileObjective):
        return _adjust_quantile(g, d, objective)
    if isinstance(objective, DistortedObjective):
        return _adjust_distorted(g, d, objective)
    raise ValidationError("objective must be QuantileObjective or DistortedObjective")


def _adjust_quantile(g, d, obj):
    y = d.targets
    n = d.n
    z = g.standardize(d.inputs)
    H = _design(z)
    K = _training_kernel(g)
    chol = _cholesky(K + 1e-10 * g.kernel_amplitude * np.eye(n))
    tau = obj.tau
    sigma = math.sqrt(_noise_floor(g, y))
    s = sigma * tau * (1 - tau) / math.sqrt(1 - 2 * tau + 2 * tau * tau)

    # warm start from the GP posterior, mean function expressed on z
    theta0 = np.concatenate([[g.intercept + g.linear_part @ g.input_mean], g.linear_part * g.input_scale])
    v0 = chol.T @ g.weights
    p = H.shape[1]

    def objective(params, alpha):
        theta, v = params[:p], params[p:]
        r = y - H @ theta - chol @ v
        val = np.sum(smoothed_pinball(r, tau, alpha)) / s + 0.5 * v @ v
        dr = smoothed_pinball_grad(r, tau, alpha) / s
        grad = np.concatenate([-H.T @ dr, -chol.T @ dr + v])
        return val, grad

    params = np.concatenate([theta0, v0])
    y_spread = float(np.std(y)) or 1.0
    alphas = []
    a = y_spread
    while a > obj.alpha:
        alphas.append(a)
        a /= ANNEAL_FACTOR
    alphas.append(obj.alpha)
    for alpha in alphas:
        res = optimize.minimize(
            objective, params, args=(alpha,), jac=True, method="L-BFGS-B",
            options={"maxiter": MAX_ITER, "maxfun": 4 * MAX_ITER, "gtol": 1e-8, "ftol": 1e-13},
        )
        if res.status == 1:
            raise ConvergenceError(f"quantile GPR adjustment hit the iteration cap at alpha={alpha}")
        params = res.x
    theta, v = params[:p], params[p:]
    weights = linalg.solve_triangular(chol.T, v, lower=False)
    linear = theta[1:] / g.input_scale
    intercept = float(theta[0] - linear @ g.input_mean)
    return replace(g, weights=weights, intercept=intercept, linear_part=linear)


def _adjust_distorted(g, d, obj, damping=DLS_DAMPING, tol=DLS_TOL, max_iter=MAX_ITER):
    y = d.targets
    n = d.n
    z = g.standardize(d.inputs)
    H = _design(z)
    p = H.shape[1]
    K = _training_kernel(g)
    noise = _noise_floor(g, y)

    def solve(omega):
        chol = _cholesky(K + np.diag(noise / (n * omega)))
        a_inv_h = linalg.cho_solve((chol, True), H)
        theta = np.linalg.solve(H.T @ a_inv_h, a_inv_h.T @ y)
        w = linalg.cho_solve((chol, True), y - H @ theta)
        # parameterise by the fitted values so the step test is in target units
        return np.concatenate([theta, H @ theta + K @ w, w])

    y_scale = max(1.0, float(np.max(np.abs(y))))
    params, _ = _rank_reweight(
        solve, lambda q: y - q[p:p + n], n, obj.distortion, obj.side, damping, tol,
        lambda q: y_scale, max_iter,
    )
    theta, w = params[:p], params[p + n:]
    linear = theta[1:] / g.input_scale
    intercept = float(theta[0] - linear @ g.input_mean)
    return replace(g, weights=w, intercept=intercept, linear_part=linear)


# ---------------------------------------------------------------- evaluation


def predict(b, x):
    """Evaluate a boundary at one risk vector (float) or a matrix of them."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if isinstance(b, LinearBoundary):
        out = b.intercept + pts @ b.coefficients
    elif isinstance(b, GprBoundary):
        k = se_kernel(b.standardize(pts), b.standardize(b.training_inputs), b.kernel_lengthscales, b.kernel_amplitude)
        out = b.intercept + pts @ b.linear_part + k @ b.weights
    else:
        raise ValidationError("unknown boundary type")
    return float(out[0]) if single else out


def boundary_gradient(b, x):
    """Analytic gradient of the boundary with respect to the raw risk vector."""
    x = np.asarray(x, dtype=float).ravel()
    if isinstance(b, LinearBoundary):
        return b.coefficients.copy()
    if not isinstance(b, GprBoundary):
        raise ValidationError("unknown boundary type")
    z = b.standardize(x)[0]
    zt = b.standardize(b.training_inputs)
    k = se_kernel(z[None, :], zt, b.kernel_lengthscales, b.kernel_amplitude)[0]
    # d k(z, z_i) / d z = -k (z - z_i) / l^2 ; chain rule through the standardisation
    dz = -((z[None, :] - zt) / b.kernel_lengthscales**2) * (k * b.weights)[:, None]
    return b.linear_part + dz.sum(axis=0) / b.input_scale
