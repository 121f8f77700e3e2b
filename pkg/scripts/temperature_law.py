"""Inferred temperature against 2 sigma^2 for the full and selected models."""
import argparse

from tmx import DatasetConfig, extract_noise, make_dataset, run_decimation, shift_dataset

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--w", type=int, default=4)
p.add_argument("--m", type=int, default=10000)
p.add_argument("--seed", type=int, default=5)
p.add_argument("--grid", default="0.02,0.06,0.1,0.14,0.18,0.22,0.26,0.3,0.4,0.5")
args = p.parse_args()

print(f"{'sigma':>6} {'theta_th':>10} {'full':>8} {'AIC':>8} {'BIC':>8}")
for sigma in (float(x) for x in args.grid.split(",")):
    _, raw = make_dataset(DatasetConfig(w=args.w, m_samples=args.m, sigma_noise=sigma, seed=args.seed))
    traj = run_decimation(shift_dataset(raw))
    th = 2 * sigma**2
    ratio = {k: extract_noise(m)[2] / th for k, m in
             (("full", traj.step_models[0]), ("AIC", traj.selected_model("AIC")),
              ("BIC", traj.selected_model("BIC")))}
    print(f"{sigma:6.2f} {th:10.5f} {ratio['full']:8.3f} {ratio['AIC']:8.3f} {ratio['BIC']:8.3f}")
