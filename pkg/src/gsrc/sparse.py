"""Per-group PCA dictionaries, group sparse coding and residual shrinkage.

The central operation is :func:`gsrc_shrink`: soft-threshold the gap
between the current group code and a guide group code, then add the guide
code back, so every coefficient moves toward the guide's coefficient by at
most its threshold and never past it. Thresholds come from
:func:`compute_lambdas`, which scales inversely with the per-row spread of
the code residual.

Batched variants (leading group axis) are used by the pipeline; the public
single-group operations delegate to them so both paths share one
implementation.
"""

from dataclasses import dataclass

import numpy as np

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class Dictionary:
    """Orthonormal per-group basis (columns = atoms) plus the group mean."""

    basis: np.ndarray
    group_mean: np.ndarray


@dataclass(frozen=True)
class LambdaSchedule:
    """Inputs of the adaptive regularization weights.

    c is the tuned schedule constant, sigma the current noise standard
    deviation, epsilon the floor applied to residual spreads before
    division.
    """

    c: float
    sigma: float
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def pca_batch(groups):
    """Learn one PCA basis per group.

    Args:
        groups: (n, b, k) stack of group matrices.

    Returns:
        (bases, means): (n, b, b) orthonormal bases with atoms (columns)
        ordered by descending eigenvalue, and (n, b) row means.

    The eigendecomposition of the symmetric covariance always yields a full
    orthonormal basis, including deterministic complements for
    rank-deficient groups. Atom signs are canonicalized so the
    largest-magnitude entry of each atom is positive.
    """
    groups = np.asarray(groups, dtype=np.float64)
    if not np.all(np.isfinite(groups)):
        raise ValueError("group contains non-finite values")
    n, b, k = groups.shape
    means = groups.mean(axis=2)
    centered = groups - means[:, :, None]
    cov = np.einsum("nbk,nck->nbc", centered, centered) / k
    _, vecs = np.linalg.eigh(cov)  # ascending eigenvalues
    bases = vecs[:, :, ::-1]
    # sign convention: largest-magnitude entry of each atom positive
    amax = np.argmax(np.abs(bases), axis=1)
    lead = np.take_along_axis(bases, amax[:, None, :], axis=1)[:, 0, :]
    flip = np.where(lead < 0, -1.0, 1.0)
    return np.ascontiguousarray(bases * flip[:, None, :]), means


def encode_batch(bases, means, groups):
    """Group codes: basis^T (group - mean) per group."""
    centered = groups - means[:, :, None]
    return np.einsum("nra,nrj->naj", bases, centered)


def decode_batch(bases, means, codes):
    """Inverse of encode_batch: basis @ codes + mean per group."""
    return np.einsum("nra,naj->nrj", bases, codes) + means[:, :, None]


def learn_pca_dictionary(group):
    """PCA dictionary of a single (b, k) group matrix."""
    group = np.asarray(group, dtype=np.float64)
    bases, means = pca_batch(group[None])
    return Dictionary(basis=bases[0], group_mean=means[0])


def encode(dictionary, group):
    """Code of a (b, k) group under a dictionary (orthonormal: D^-1 = D^T)."""
    group = np.asarray(group, dtype=np.float64)
    if group.shape[0] != dictionary.basis.shape[0]:
        raise ValueError(
            f"group rows {group.shape[0]} do not match basis size "
            f"{dictionary.basis.shape[0]}"
        )
    return encode_batch(dictionary.basis[None], dictionary.group_mean[None], group[None])[0]


def decode(dictionary, code):
    """Reconstruct a (b, k) group matrix from its code."""
    code = np.asarray(code, dtype=np.float64)
    if code.shape[0] != dictionary.basis.shape[1]:
        raise ValueError(
            f"code rows {code.shape[0]} do not match atom count "
            f"{dictionary.basis.shape[1]}"
        )
    return decode_batch(dictionary.basis[None], dictionary.group_mean[None], code[None])[0]


def soft_threshold(x, lam):
    """sign(x) * max(|x| - lam, 0); the proximal map of lam * |.|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return float(out) if out.ndim == 0 else out


def gsrc_shrink(current_code, guide_code, lambdas):
    """Shrink each coefficient toward the guide coefficient.

    Entry (r, j) becomes soft_threshold(current - guide, lambdas[r]) +
    guide: a move of at most lambdas[r] toward the guide value, never past
    it. lambdas has length b (one threshold per dictionary row).
    """
    current_code = np.asarray(current_code, dtype=np.float64)
    guide_code = np.asarray(guide_code, dtype=np.float64)
    if current_code.shape != guide_code.shape:
        raise ValueError(
            f"code shapes differ: {current_code.shape} vs {guide_code.shape}"
        )
    lambdas = np.asarray(lambdas, dtype=np.float64).reshape(-1, 1)
    if lambdas.shape[0] != current_code.shape[0]:
        raise ValueError(
            f"lambda count {lambdas.shape[0]} does not match code rows "
            f"{current_code.shape[0]}"
        )
    if np.any(lambdas < 0):
        raise ValueError("lambdas must be >= 0")
    return soft_threshold(current_code - guide_code, lambdas) + guide_code


def estimate_row_sigmas(current_code, guide_code, epsilon):
    """Per-row spread of the code residual, floored at epsilon.

    Returns, for each dictionary row, the population standard deviation of
    (current - guide) over the k group members.
    """
    current_code = np.asarray(current_code, dtype=np.float64)
    guide_code = np.asarray(guide_code, dtype=np.float64)
    if current_code.shape != guide_code.shape:
        raise ValueError(
            f"code shapes differ: {current_code.shape} vs {guide_code.shape}"
        )
    resid = current_code - guide_code
    mean = resid.mean(axis=-1, keepdims=True)
    std = np.sqrt(((resid - mean) ** 2).mean(axis=-1))
    return np.maximum(std, epsilon)


def compute_lambdas(sched, row_sigmas):
    """Adaptive thresholds: c * 2*sqrt(2) * sigma^2 / row_sigma per row."""
    row_sigmas = np.asarray(row_sigmas, dtype=np.float64)
    if np.any(row_sigmas <= 0):
        raise ValueError("row sigmas must be > 0")
    return sched.c * 2.0 * _SQRT2 * sched.sigma**2 / row_sigmas


@dataclass(frozen=True)
class ResidualHistogram:
    """Histogram of pooled code residuals plus distribution fits.

    Log-likelihoods use the maximum-likelihood Gaussian (mean, population
    std) and Laplacian (median, mean absolute deviation) fits. The
    ``degenerate`` flag marks all-equal samples, for which the fits are
    meaningless and reported as NaN.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    n_samples: int
    gauss_mean: float
    gauss_std: float
    gauss_loglik: float
    laplace_loc: float
    laplace_scale: float
    laplace_loglik: float
    excess_kurtosis: float
    degenerate: bool

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def residual_histogram(residuals, bins, value_range):
    """Histogram and Gaussian/Laplacian fits of pooled residual entries."""
    x = np.asarray(residuals, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty residual stream")
    lo, hi = value_range
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if not lo < hi:
        raise ValueError(f"invalid histogram range ({lo}, {hi})")
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))

    n = x.size
    g_mean = float(x.mean())
    g_std = float(np.sqrt(((x - g_mean) ** 2).mean()))
    l_loc = float(np.median(x))
    l_scale = float(np.abs(x - l_loc).mean())
    degenerate = g_std == 0.0
    if degenerate:
        g_ll = l_ll = kurt = float("nan")
    else:
        g_ll = float(-0.5 * n * np.log(2.0 * np.pi * g_std**2) - 0.5 * n)
        l_ll = float(-n * np.log(2.0 * l_scale) - n)
        m2 = ((x - g_mean) ** 2).mean()
        m4 = ((x - g_mean) ** 4).mean()
        kurt = float(m4 / m2**2 - 3.0)
    return ResidualHistogram(
        bin_edges=edges,
        counts=counts,
        n_samples=n,
        gauss_mean=g_mean,
        gauss_std=g_std,
        gauss_loglik=g_ll,
        laplace_loc=l_loc,
        laplace_scale=l_scale,
        laplace_loglik=l_ll,
        excess_kurtosis=kurt,
        degenerate=degenerate,
    )
