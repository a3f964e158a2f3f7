"""Command-line interface.

Subcommands: add-noise, prefilter, denoise, metrics, residual-hist, bench.
Every command is deterministic given its flags (all randomness is seeded);
exit codes are 0 on success, 1 on runtime failure, 2 on usage errors.
"""

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .image import NoiseSpec, add_awgn, load_image, read_raw, save_image, write_raw
from .metrics import psnr, ssim
from .pipeline import (
    APS_ADAPTIVE,
    APS_GUIDE,
    APS_ITERATE,
    collect_group_residuals,
    default_config,
    denoise,
)
from .prefilter import (
    DEFAULT_THRESHOLD_FACTOR,
    MODE_BLOCK_DCT,
    MODE_EXTERNAL,
    PrefilterSpec,
    prefilter,
)
from .sparse import residual_histogram

RAW_SUFFIX = ".f64"


def _positive(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _load_any(path):
    """Load an image file; the raw float64 sidecar keeps unclamped values."""
    if str(path).endswith(RAW_SUFFIX):
        return read_raw(path)
    return load_image(path)


def _bench_case_seed(base_seed, image_path, sigma):
    """Stable per-(image, sigma) seed so adding cases never perturbs others."""
    key = f"{base_seed}|{image_path}|{sigma!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def _config_from_args(args, kind):
    overrides = {}
    for name in (
        "c",
        "delta",
        "gamma",
        "tau",
        "iterations",
        "patch_side",
        "group_size",
        "window",
        "stride",
        "lambda_granularity",
        "epsilon",
        "early_stop_tol",
        "threads",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "aps", None) is not None:
        overrides["aps_mode"] = args.aps
    return default_config(args.sigma, kind, **overrides)


def _guide_for(args, noisy):
    if args.guide is not None:
        guide = _load_any(args.guide)
        if guide.shape != noisy.shape:
            raise ValueError(
                f"guide dimensions {guide.shape[1]}x{guide.shape[0]} do not match "
                f"noisy image {noisy.shape[1]}x{noisy.shape[0]}"
            )
        return guide, args.guide_kind
    spec = PrefilterSpec(
        mode=MODE_BLOCK_DCT,
        dct_block=args.dct_block,
        dct_threshold_factor=args.dct_threshold_factor,
    )
    return prefilter(noisy, spec, args.sigma), "dct"


def _add_guide_flags(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--guide", type=Path, help="externally pre-filtered guide image")
    group.add_argument(
        "--prefilter",
        choices=["dct"],
        help="compute the guide with the built-in block-DCT filter",
    )
    parser.add_argument(
        "--guide-kind",
        choices=["bm3d", "epll"],
        default="bm3d",
        help="parameter schedule to use with --guide (default bm3d)",
    )
    parser.add_argument("--dct-block", type=int, default=8)
    parser.add_argument(
        "--dct-threshold-factor", type=_positive, default=DEFAULT_THRESHOLD_FACTOR
    )


def _add_config_flags(parser):
    parser.add_argument("--c", dest="c", type=float, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--patch-side", dest="patch_side", type=int, default=None)
    parser.add_argument("--group-size", dest="group_size", type=int, default=None)
    parser.add_argument("--window", type=int, default=None)
    parser.add_argument("--stride", type=int, default=None)
    parser.add_argument(
        "--lambda-granularity",
        dest="lambda_granularity",
        choices=["per-row", "per-group"],
        default=None,
    )
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument(
        "--aps", choices=[APS_ADAPTIVE, APS_ITERATE, APS_GUIDE], default=None
    )
    parser.add_argument("--early-stop-tol", dest="early_stop_tol", type=float, default=None)
    parser.add_argument("--threads", type=int, default=None)


def cmd_add_noise(args):
    img = _load_any(args.infile)
    noisy = add_awgn(img, NoiseSpec(sigma=args.sigma, seed=args.seed))
    save_image(noisy, args.out)
    sidecar = Path(str(args.out) + RAW_SUFFIX)
    write_raw(noisy, sidecar)
    print(f"wrote {args.out} (clamped) and {sidecar} (unclamped)")
    return 0


def cmd_prefilter(args):
    noisy = _load_any(args.infile)
    if args.external is not None:
        spec = PrefilterSpec(mode=MODE_EXTERNAL, path=args.external)
    else:
        spec = PrefilterSpec(
            mode=MODE_BLOCK_DCT,
            dct_block=args.dct_block,
            dct_threshold_factor=args.dct_threshold_factor,
        )
    guide = prefilter(noisy, spec, args.sigma)
    save_image(guide, args.out)
    write_raw(guide, Path(str(args.out) + RAW_SUFFIX))
    print(f"wrote {args.out}")
    return 0


def _write_log(path, logs):
    lines = ["iteration,sigma,aps_target,psnr,ssim"]
    for row in logs:
        p = "" if row.psnr is None else f"{row.psnr:.6f}"
        s = "" if row.ssim is None else f"{row.ssim:.6f}"
        lines.append(f"{row.iteration},{row.sigma!r},{row.search_target},{p},{s}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def cmd_denoise(args):
    noisy = _load_any(args.infile)
    guide, kind = _guide_for(args, noisy)
    cfg = _config_from_args(args, kind)
    ref = _load_any(args.ref) if args.ref is not None else None
    estimate, logs = denoise(noisy, guide, cfg, ref=ref)
    save_image(estimate, args.out)
    if args.raw_out:
        write_raw(estimate, Path(str(args.out) + RAW_SUFFIX))
    if args.log is not None:
        _write_log(args.log, logs)
    if ref is not None:
        print(f"psnr={psnr(ref, estimate):.4f} ssim={ssim(ref, estimate):.4f}")
    return 0


def cmd_metrics(args):
    a = _load_any(args.image_a)
    b = _load_any(args.image_b)
    print(f"psnr={psnr(a, b):.4f} ssim={ssim(a, b):.4f}")
    return 0


def cmd_residual_hist(args):
    noisy = _load_any(args.infile)
    guide, kind = _guide_for(args, noisy)
    cfg = _config_from_args(args, kind)
    resid = collect_group_residuals(noisy, guide, cfg)
    hist = residual_histogram(resid, args.bins, (args.lo, args.hi))
    width = hist.bin_edges[1] - hist.bin_edges[0]
    lines = ["bin_center,count,gaussian_fit,laplacian_fit"]
    for center, count in zip(hist.bin_centers, hist.counts):
        if hist.degenerate:
            g_fit = l_fit = float("nan")
        else:
            g_pdf = np.exp(-0.5 * ((center - hist.gauss_mean) / hist.gauss_std) ** 2) / (
                hist.gauss_std * np.sqrt(2.0 * np.pi)
            )
            l_pdf = np.exp(-abs(center - hist.laplace_loc) / hist.laplace_scale) / (
                2.0 * hist.laplace_scale
            )
            g_fit = hist.n_samples * width * g_pdf
            l_fit = hist.n_samples * width * l_pdf
        lines.append(f"{center:.6f},{count},{g_fit:.6f},{l_fit:.6f}")
    Path(args.out).write_text("\n".join(lines) + "\n", newline="\n")
    print(
        f"samples={hist.n_samples} excess_kurtosis={hist.excess_kurtosis:.4f} "
        f"laplace_loglik={hist.laplace_loglik:.4f} gauss_loglik={hist.gauss_loglik:.4f}"
    )
    return 0


def _parse_bench_config(path):
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: bad config line {raw!r} (expected key=value)")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def _bench_rows(args):
    aps_modes = {"on": [True], "off": [False], "both": [True, False]}[args.aps]
    rows = []
    for image_path in sorted(str(p) for p in args.images):
        clean = _load_any(image_path)
        for sigma in sorted(args.sigmas):
            seed = _bench_case_seed(args.seed, image_path, sigma)
            noisy = add_awgn(clean, NoiseSpec(sigma=sigma, seed=seed))
            spec = PrefilterSpec(mode=MODE_BLOCK_DCT)
            guide = prefilter(noisy, spec, sigma)
            for aps_on in aps_modes:
                cfg = default_config(
                    sigma,
                    "dct",
                    aps_mode=APS_ADAPTIVE if aps_on else APS_ITERATE,
                    threads=args.threads,
                )
                estimate, _ = denoise(noisy, guide, cfg)
                rows.append(
                    {
                        "image": image_path,
                        "sigma": sigma,
                        "aps": "on" if aps_on else "off",
                        "psnr_noisy": psnr(clean, noisy),
                        "ssim_noisy": ssim(clean, noisy),
                        "psnr_guide": psnr(clean, guide),
                        "ssim_guide": ssim(clean, guide),
                        "psnr_denoised": psnr(clean, estimate),
                        "ssim_denoised": ssim(clean, estimate),
                    }
                )
    return rows


_BENCH_COLUMNS = (
    "image",
    "sigma",
    "aps",
    "psnr_noisy",
    "ssim_noisy",
    "psnr_guide",
    "ssim_guide",
    "psnr_denoised",
    "ssim_denoised",
    "gain_db",
)


def _bench_report(rows):
    """CSV and Markdown text for bench rows plus per-(sigma, aps) averages."""
    for row in rows:
        row["gain_db"] = row["psnr_denoised"] - row["psnr_guide"]
    averages = []
    for sigma in sorted({r["sigma"] for r in rows}):
        for aps in sorted({r["aps"] for r in rows}):
            sub = [r for r in rows if r["sigma"] == sigma and r["aps"] == aps]
            if not sub:
                continue
            avg = {"image": "average", "sigma": sigma, "aps": aps}
            for key in _BENCH_COLUMNS[3:]:
                avg[key] = sum(r[key] for r in sub) / len(sub)
            averages.append(avg)
    all_rows = rows + averages

    def fmt(row, key):
        value = row[key]
        return f"{value:.4f}" if isinstance(value, float) else str(value)

    csv_lines = [",".join(_BENCH_COLUMNS)]
    csv_lines += [",".join(fmt(r, k) for k in _BENCH_COLUMNS) for r in all_rows]
    md_lines = [
        "| " + " | ".join(_BENCH_COLUMNS) + " |",
        "|" + "---|" * len(_BENCH_COLUMNS),
    ]
    md_lines += ["| " + " | ".join(fmt(r, k) for k in _BENCH_COLUMNS) + " |" for r in all_rows]
    return "\n".join(csv_lines) + "\n", "\n".join(md_lines) + "\n"


def cmd_bench(args):
    if args.config is not None:
        values = _parse_bench_config(args.config)
        if args.images is None and "images" in values:
            args.images = [Path(p.strip()) for p in values["images"].split(",") if p.strip()]
        if args.sigmas is None and "sigmas" in values:
            args.sigmas = [float(s) for s in values["sigmas"].split(",")]
        if "seed" in values and args.seed == 0:
            args.seed = int(values["seed"])
        if "output" in values and args.out is None:
            args.out = Path(values["output"])
        if "aps" in values and args.aps == "on":
            args.aps = values["aps"]
    if not args.images:
        raise ValueError("no input images given (use --images or a config file)")
    if not args.sigmas:
        raise ValueError("no noise levels given (use --sigmas or a config file)")
    if any(s <= 0 for s in args.sigmas):
        raise ValueError("sigmas must be > 0")
    if args.out is None:
        raise ValueError("no output path given (use --out or a config file)")
    rows = _bench_rows(args)
    csv_text, md_text = _bench_report(rows)
    out_csv = Path(args.out)
    out_csv.write_text(csv_text, newline="\n")
    out_md = out_csv.with_suffix(".md")
    out_md.write_text(md_text, newline="\n")
    print(f"wrote {out_csv} and {out_md} ({len(rows)} cases)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gsrc",
        description="Guided grayscale denoising via group sparsity residual shrinkage",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--backend",
        choices=["auto", *kernels.available_backends()],
        default=None,
        help="kernel backend override (default: compiled when available)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="synthesize seeded white Gaussian noise")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sigma", type=_positive, required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("prefilter", help="produce a guide image")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sigma", type=_positive, required=True)
    p.add_argument("--external", type=Path, default=None,
                   help="pass an externally pre-filtered file through (validated)")
    p.add_argument("--dct-block", type=int, default=8)
    p.add_argument("--dct-threshold-factor", type=_positive,
                   default=DEFAULT_THRESHOLD_FACTOR)
    p.set_defaults(func=cmd_prefilter)

    p = sub.add_parser("denoise", help="run the full denoising loop")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sigma", type=_positive, required=True)
    p.add_argument("--ref", type=Path, default=None, help="clean reference for metrics")
    p.add_argument("--log", type=Path, default=None, help="per-iteration CSV log")
    p.add_argument("--raw-out", action="store_true",
                   help="also write the unclamped .f64 sidecar")
    _add_guide_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("metrics", help="print psnr/ssim for an image pair")
    p.add_argument("image_a", type=Path)
    p.add_argument("image_b", type=Path)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("residual-hist", help="histogram of first-iteration code residuals")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sigma", type=_positive, required=True)
    p.add_argument("--bins", type=int, default=101)
    p.add_argument("--lo", type=float, default=-50.0)
    p.add_argument("--hi", type=float, default=50.0)
    _add_guide_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_residual_hist)

    p = sub.add_parser("bench", help="PSNR/SSIM table over images x noise levels")
    p.add_argument("--images", type=Path, nargs="+", default=None,
                   help="clean source images")
    p.add_argument("--sigmas", type=float, nargs="+", default=None)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", type=Path, default=None, help="CSV output path")
    p.add_argument("--aps", choices=["on", "off", "both"], default="on")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", type=Path, default=None,
                   help="flat key=value file: images, sigmas, seed, output, aps")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend is not None:
        kernels.set_backend(args.backend)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
