"""The full iterative denoising loop.

Each outer iteration regularizes the working image back toward the noisy
input, re-estimates the remaining noise level, decides (adaptively, via an
SSIM comparison against the guide) which image drives the similar-patch
search, and then runs the per-group stage: PCA dictionary from the noisy
group, codes for both the noisy and the guide group, residual-spread
thresholds, shrinkage toward the guide code, reconstruction, aggregation.

Groups are processed in fixed-size chunks. Chunks may run on a thread pool,
but chunk boundaries and the merge order never depend on the thread count,
so results are bit-identical at any parallelism level.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels, sparse
from .metrics import mse, psnr, ssim
from .patch import exemplar_grid

#: Exemplars per processing chunk; fixed so threading cannot change results.
CHUNK_SIZE = 64

LAMBDA_PER_ROW = "per-row"
LAMBDA_PER_GROUP = "per-group"

APS_ADAPTIVE = "adaptive"
APS_ITERATE = "iterate"
APS_GUIDE = "guide"

# (sigma upper bound, c, delta, gamma, tau) per noise band, by guide kind
_SCHEDULE_BM3D = [
    (20.0, 0.2, 0.2, 0.7, 1e-4),
    (30.0, 0.4, 0.1, 0.5, 7e-4),
    (40.0, 0.2, 0.2, 0.7, 6e-5),
    (50.0, 0.5, 0.1, 0.4, 6e-5),
    (75.0, 0.9, 0.1, 0.3, 6e-5),
    (100.0, 1.0, 0.1, 0.3, 2e-4),
]
_SCHEDULE_EPLL = [
    (20.0, 0.3, 0.1, 0.5, 5e-4),
    (30.0, 0.3, 0.1, 0.5, 5e-4),
    (40.0, 0.3, 0.1, 0.5, 6e-4),
    (50.0, 0.5, 0.1, 0.4, 4e-4),
    (75.0, 0.9, 0.1, 0.3, 1e-4),
    (100.0, 0.9, 0.1, 0.3, 2e-4),
]
# the built-in DCT guide reuses the transform-domain (bm3d-like) schedule
_SCHEDULES = {"bm3d": _SCHEDULE_BM3D, "epll": _SCHEDULE_EPLL, "dct": _SCHEDULE_BM3D}


@dataclass(frozen=True)
class DenoiseConfig:
    """All scalar knobs of the denoising loop."""

    sigma: float
    c: float
    delta: float
    gamma: float
    tau: float
    iterations: int = 8
    patch_side: int = 7
    group_size: int = 60
    window: int = 30
    stride: int = 4
    lambda_granularity: str = LAMBDA_PER_ROW
    epsilon: float = 1e-6
    aps_mode: str = APS_ADAPTIVE
    early_stop_tol: float = 1e-4
    threads: int = 1

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")
        if self.window < self.patch_side:
            raise ValueError(
                f"window {self.window} must be >= patch side {self.patch_side}"
            )
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.lambda_granularity not in (LAMBDA_PER_ROW, LAMBDA_PER_GROUP):
            raise ValueError(f"unknown lambda granularity {self.lambda_granularity!r}")
        if self.aps_mode not in (APS_ADAPTIVE, APS_ITERATE, APS_GUIDE):
            raise ValueError(f"unknown aps mode {self.aps_mode!r}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.early_stop_tol < 0:
            raise ValueError("early_stop_tol must be >= 0 (0 disables early stop)")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class IterationLog:
    """One outer-iteration record of the denoising loop."""

    iteration: int
    sigma: float
    search_target: str
    psnr: float | None = None
    ssim: float | None = None


def default_config(sigma, prefilter_kind="dct", **overrides):
    """Noise-banded default configuration.

    ``prefilter_kind`` selects the schedule column: 'bm3d' and 'epll' for
    externally pre-filtered guides ('-like' suffixes accepted), 'dct' for
    the built-in filter. Keyword overrides replace individual fields.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    kind = str(prefilter_kind).lower().removesuffix("-like")
    if kind not in _SCHEDULES:
        raise ValueError(
            f"unknown prefilter kind {prefilter_kind!r} "
            f"(expected one of {sorted(_SCHEDULES)})"
        )
    sched_sigma = sigma
    if sigma > 100.0:
        warnings.warn(
            f"sigma={sigma} exceeds the tuned range; reusing the top noise band"
        )
        sched_sigma = 100.0
    for bound, c, delta, gamma, tau in _SCHEDULES[kind]:
        if sched_sigma <= bound:
            break
    if sched_sigma <= 20.0:
        patch_side = 6
    elif sched_sigma <= 50.0:
        patch_side = 7
    elif sched_sigma <= 75.0:
        patch_side = 8
    else:
        patch_side = 9
    if sched_sigma <= 50.0:
        group_size = 60
    elif sched_sigma <= 75.0:
        group_size = 80
    else:
        group_size = 90
    cfg = DenoiseConfig(
        sigma=sigma,
        c=c,
        delta=delta,
        gamma=gamma,
        tau=tau,
        patch_side=patch_side,
        group_size=group_size,
    )
    return replace(cfg, **overrides) if overrides else cfg


def iterative_regularize(y, x_hat, delta):
    """Feed a delta-fraction of the method residual back: x_hat + delta*(y - x_hat)."""
    y = np.asarray(y, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if y.shape != x_hat.shape:
        raise ValueError(f"image dimensions differ: {y.shape} vs {x_hat.shape}")
    return x_hat + delta * (y - x_hat)


def reestimate_sigma(sigma0, y, x_hat, gamma):
    """Remaining-noise estimate: gamma * sqrt(max(sigma0^2 - mse(y, x_hat), 0)).

    The squared-norm term is the per-pixel mean squared difference so its
    units match sigma^2.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return gamma * float(np.sqrt(max(sigma0**2 - mse(y, x_hat), 0.0)))


def aps_select(z, y_next, y_curr, tau, first_iteration):
    """Choose the similar-patch search target for this iteration.

    The first iteration always searches the guide. Afterwards the iterate
    is used only while it keeps gaining structural similarity to the guide
    slower than tau: returns 'iterate' when
    ssim(y_next, z) - ssim(y_curr, z) < tau, else 'guide'.
    """
    if first_iteration:
        return APS_GUIDE
    delta_ssim = ssim(y_next, z) - ssim(y_curr, z)
    return APS_ITERATE if delta_ssim < tau else APS_GUIDE


def _lambda_matrix(code_current, code_guide, sigma_l, cfg):
    """Per-(group, row) thresholds for the shrinkage stage."""
    sched = sparse.LambdaSchedule(c=cfg.c, sigma=sigma_l, epsilon=cfg.epsilon)
    resid = code_current - code_guide
    if cfg.lambda_granularity == LAMBDA_PER_GROUP:
        flat = resid.reshape(resid.shape[0], -1)
        m = flat.mean(axis=1, keepdims=True)
        spread = np.sqrt(((flat - m) ** 2).mean(axis=1))
        spread = np.maximum(spread, cfg.epsilon)[:, None]
    else:
        m = resid.mean(axis=2, keepdims=True)
        spread = np.sqrt(((resid - m) ** 2).mean(axis=2))
        spread = np.maximum(spread, cfg.epsilon)
    lam = sparse.compute_lambdas(sched, spread)
    return np.broadcast_to(lam, (resid.shape[0], resid.shape[1])).copy()


def _process_chunk(chunk, data_img, guide_img, target_img, sigma_l, cfg, collect):
    """Run the group stage for one exemplar chunk.

    Returns partial (values, counts) accumulators sized like the image and,
    when ``collect`` is set, the pooled pre-shrinkage code residuals.
    """
    b_side = cfg.patch_side
    rows, cols = kernels.knn_batch(
        target_img,
        np.ascontiguousarray(chunk[:, 0]),
        np.ascontiguousarray(chunk[:, 1]),
        b_side,
        cfg.window,
        cfg.group_size,
    )
    g_data = kernels.gather_groups(data_img, rows, cols, b_side)
    g_guide = kernels.gather_groups(guide_img, rows, cols, b_side)
    bases, means = sparse.pca_batch(g_data)
    code_current = sparse.encode_batch(bases, means, g_data)
    code_guide = sparse.encode_batch(bases, means, g_guide)
    resid = code_current.ravel() - code_guide.ravel() if collect else None
    lam = _lambda_matrix(code_current, code_guide, sigma_l, cfg)
    shrunk = sparse.soft_threshold(code_current - code_guide, lam[:, :, None]) + code_guide
    rec = sparse.decode_batch(bases, means, shrunk)
    vals = np.zeros(data_img.shape, dtype=np.float64)
    cnts = np.zeros(data_img.shape, dtype=np.float64)
    kernels.scatter_groups(vals, cnts, rows, cols, b_side, np.ascontiguousarray(rec))
    return vals, cnts, resid


def _group_stage(data_img, guide_img, target_img, sigma_l, cfg, exemplars, collect=False):
    """One full pass over all exemplar groups; returns (image, residuals)."""
    chunks = [
        exemplars[i : i + CHUNK_SIZE] for i in range(0, len(exemplars), CHUNK_SIZE)
    ]

    def work(chunk):
        return _process_chunk(
            chunk, data_img, guide_img, target_img, sigma_l, cfg, collect
        )

    vals = np.zeros(data_img.shape, dtype=np.float64)
    cnts = np.zeros(data_img.shape, dtype=np.float64)
    pooled = []
    executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        results = map(work, chunks) if executor is None else executor.map(work, chunks)
        # merge partials in chunk order: bit-identical for any thread count
        for cvals, ccnts, resid in results:
            vals += cvals
            cnts += ccnts
            if collect:
                pooled.append(resid)
    finally:
        if executor is not None:
            executor.shutdown()
    if np.any(cnts == 0):
        raise ValueError("exemplar grid left uncovered pixels")
    out = vals / cnts
    return out, (np.concatenate(pooled) if collect else None)


def _prepare(y, z, cfg):
    y = np.ascontiguousarray(y, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    if y.shape != z.shape:
        raise ValueError(
            f"noisy/guide dimensions differ: {y.shape[1]}x{y.shape[0]} vs "
            f"{z.shape[1]}x{z.shape[0]}"
        )
    h, w = y.shape
    if cfg.patch_side > min(h, w):
        raise ValueError(f"image {w}x{h} smaller than patch side {cfg.patch_side}")
    return y, z, exemplar_grid(w, h, cfg.patch_side, cfg.stride)


def denoise(y, z, cfg, ref=None):
    """Run the full iterative loop.

    Args:
        y: noisy image (unclamped float intensities).
        z: guide image with the same dimensions.
        cfg: DenoiseConfig.
        ref: optional clean reference; when given, per-iteration PSNR/SSIM
            against it are recorded in the log.

    Returns:
        (estimate, logs): the final estimate and one IterationLog per
        executed iteration.
    """
    y, z, exemplars = _prepare(y, z, cfg)
    x_hat = y.copy()
    y_reg_prev = None
    prev_proxy = None
    logs = []
    for it in range(1, cfg.iterations + 1):
        y_reg = iterative_regularize(y, x_hat, cfg.delta)
        sigma_l = reestimate_sigma(cfg.sigma, y, x_hat, cfg.gamma)
        if cfg.aps_mode == APS_ADAPTIVE:
            tag = aps_select(z, y_reg, y_reg_prev, cfg.tau, first_iteration=(it == 1))
        else:
            tag = cfg.aps_mode
        target_img = z if tag == APS_GUIDE else y_reg
        x_hat, _ = _group_stage(y_reg, z, target_img, sigma_l, cfg, exemplars)
        y_reg_prev = y_reg
        logs.append(
            IterationLog(
                iteration=it,
                sigma=sigma_l,
                search_target=tag,
                psnr=None if ref is None else psnr(ref, x_hat),
                ssim=None if ref is None else ssim(ref, x_hat),
            )
        )
        proxy = mse(y_reg, x_hat)
        if (
            cfg.early_stop_tol > 0
            and prev_proxy is not None
            and abs(prev_proxy - proxy) < cfg.early_stop_tol
        ):
            break
        prev_proxy = proxy
    return x_hat, logs


def collect_group_residuals(y, z, cfg):
    """Pooled first-iteration code residuals (current minus guide codes).

    Replays the first iteration of :func:`denoise` (search target = guide)
    and returns every residual entry as a flat array. This is the data
    behind the residual histogram tooling.
    """
    y, z, exemplars = _prepare(y, z, cfg)
    y_reg = iterative_regularize(y, y, cfg.delta)
    sigma_l = reestimate_sigma(cfg.sigma, y, y, cfg.gamma)
    target_img = y_reg if cfg.aps_mode == APS_ITERATE else z
    _, resid = _group_stage(
        y_reg, z, target_img, sigma_l, cfg, exemplars, collect=True
    )
    return resid
