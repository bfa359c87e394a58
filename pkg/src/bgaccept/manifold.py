"""Representative points and eigen-spectra of moment datasets."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import NumericalError, ValidationError

DEFAULT_K = 16
LLOYD_MAX_ITER = 500
AFFINITY_FLOOR = 1e-12


@dataclass(frozen=True)
class QuantizedSet:
    """Cluster representatives and the percentage of rows each one stands for."""

    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    cumulative_weights: np.ndarray

    @property
    def weights(self):
        return np.diff(np.concatenate(([0.0], self.cumulative_weights)))


def _as_data(data, min_rows):
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValidationError("data must be an n x d matrix")
    if x.shape[0] < min_rows:
        raise ValidationError(f"need at least {min_rows} rows, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("data contains non-finite entries")
    return x


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def quantize(data, k=DEFAULT_K, seed=0, max_iter=LLOYD_MAX_ITER) -> QuantizedSet:
    """k-means++ seeding followed by Lloyd iterations to an assignment fixpoint.

    Rows are sorted lexicographically first so the result does not depend on
    the input order. A cluster that empties is reseeded with the point
    farthest from its current center. Representatives are returned in
    lexicographic order.
    """
    x = _as_data(data, 1)
    k = int(k)
    if k < 1 or x.shape[0] < k:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={x.shape[0]}")
    x = x[np.lexsort(x.T[::-1])]
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(x, k, rng)
    labels = None
    for _ in range(max_iter):
        dist = cdist(x, centers, "sqeuclidean")
        new_labels = np.argmin(dist, axis=1)
        counts = np.bincount(new_labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            own = dist[np.arange(x.shape[0]), new_labels]
            own[counts[new_labels] < 2] = -np.inf
            far = int(np.argmax(own))
            new_labels[far] = j
            dist[far, :] = np.inf
            dist[far, j] = 0.0
            counts = np.bincount(new_labels, minlength=k)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = x[labels == j].mean(axis=0)
    counts = np.bincount(labels, minlength=k)
    weights = 100.0 * counts / x.shape[0]
    order = np.lexsort(centers.T[::-1])
    return QuantizedSet(points=centers[order], weights=weights[order])


def _report(eigenvalues):
    ev = np.sort(np.clip(eigenvalues, 0.0, None))[::-1]
    total = ev.sum()
    if total > 0:
        cum = 100.0 * np.cumsum(ev) / total
        cum[-1] = 100.0
    else:
        # fully degenerate spectrum: spread the weight evenly
        cum = 100.0 * np.arange(1, ev.size + 1) / ev.size
    return SpectrumReport(eigenvalues=ev, cumulative_weights=cum)


def _standardize(x):
    scale = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(scale > 0, scale, 1.0)


def pca_spectrum(data, standardize=True) -> SpectrumReport:
    """Eigenvalues of the sample covariance with cumulative percentage of trace."""
    x = _as_data(data, 2)
    if standardize:
        x = _standardize(x)
    cov = np.cov(x, rowvar=False)
    return _report(linalg.eigvalsh(np.atleast_2d(cov)))


def diffusion_spectrum(data, epsilon="auto", standardize=True, n_components=None) -> SpectrumReport:
    """Nontrivial eigenvalues of the diffusion-map Markov operator.

    Affinities ``exp(-|x-y|^2 / epsilon)`` are row-normalised into a
    transition matrix ``P = D^-1 W``; its spectrum is read off the
    symmetric conjugate ``D^-1/2 W D^-1/2``. The leading eigenvalue 1
    (constant eigenvector) is dropped and the next ``n_components``
    (default: the data dimension) are reported. ``epsilon="auto"`` uses the
    median squared pairwise distance.
    """
    x = _as_data(data, 2)
    if standardize:
        x = _standardize(x)
    sq = squareform(pdist(x, "sqeuclidean"))
    if isinstance(epsilon, str):
        if epsilon != "auto":
            raise ValidationError("epsilon must be positive or 'auto'")
        off = sq[np.triu_indices_from(sq, 1)]
        epsilon = float(np.median(off))
        if epsilon <= 0:
            positive = off[off > 0]
            epsilon = float(np.median(positive)) if positive.size else 1.0
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    w = np.exp(-sq / epsilon)
    n_parts, _ = connected_components(w >= AFFINITY_FLOOR, directed=False)
    if n_parts > 1:
        raise NumericalError(
            f"affinity graph splits into {n_parts} components at epsilon={epsilon:.3g}"
        )
    deg = w.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    sym = w * inv_sqrt[:, None] * inv_sqrt[None, :]
    ev = np.sort(linalg.eigvalsh(sym))[::-1]
    m = x.shape[1] if n_components is None else int(n_components)
    m = max(1, min(m, ev.size - 1))
    nontrivial = np.clip(ev[1 : m + 1], 0.0, 1.0)
    return _report(nontrivial)
