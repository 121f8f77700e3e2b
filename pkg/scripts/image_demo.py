"""Reconstruct a w x w test image through a noisy channel.

The noisy image at the output of the true channel is mapped back with the
directly inferred inverse (T^-1)_inf and with inv(T_inf).
"""
import argparse

import numpy as np

from tmx import DatasetConfig, extract_T, infer_inverse, make_dataset, run_decimation, shift_dataset
from tmx.metrics import SingularMatrixError, correlation, matrix_inverse


def test_image(w):
    # a ring with a bar through it
    y, x = np.mgrid[:w, :w] - (w - 1) / 2
    r = np.hypot(x, y)
    img = ((r > w / 5) & (r < w / 2.5)).astype(float)
    img[w // 2, :] = 1.0
    return 0.3 + 0.4 * img


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--m", type=int, default=10000)
    p.add_argument("--seed", type=int, default=5)
    p.add_argument("--criterion", default="AIC")
    p.add_argument("--out", default="image_demo.npz")
    args = p.parse_args()

    cfg = DatasetConfig(w=args.w, m_samples=args.m, sigma_noise=args.sigma, seed=args.seed)
    t, raw = make_dataset(cfg)
    ds = shift_dataset(raw)
    t_inf = extract_T(run_decimation(ds).selected_model(args.criterion))
    t_inv_inf = extract_T(infer_inverse(ds).selected_model(args.criterion))

    img = test_image(args.w).ravel()
    rng = np.random.default_rng(args.seed + 1)
    out = np.clip(t.T @ img + rng.normal(0, args.sigma, img.size), 0, 1)
    mu_in, mu_out = ds.channel_means[: img.size], ds.channel_means[img.size:]

    recon = {"inverse": mu_in + t_inv_inf @ (out - mu_out)}
    try:
        recon["inverted_direct"] = mu_in + matrix_inverse(t_inf)[0] @ (out - mu_out)
    except SingularMatrixError:
        recon["inverted_direct"] = None
    for name, rec in recon.items():
        c = "singular" if rec is None else f"{correlation(img, rec):.3f}"
        print(f"{name:16s} correlation with the original: {c}")
    np.savez(args.out, image=img.reshape(args.w, args.w), output=out,
             **{k: v.reshape(args.w, args.w) for k, v in recon.items() if v is not None})
    print(f"arrays -> {args.out}")


if __name__ == "__main__":
    main()
