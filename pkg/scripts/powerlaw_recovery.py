"""Exponent recovery and likelihood-ratio direction on generated tails."""

import argparse

import numpy as np

from gradedvocal import stats
from gradedvocal.synth import gen_geometric_ints, gen_powerlaw_ints


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("-n", type=int, default=10_000)
    args = ap.parse_args()
    print("alpha  xmin  mean_hat   sd      in_0.1   lrt_pl")
    for alpha in (1.5, 1.79, 2.0, 2.5, 3.0):
        for xmin in (1, 5):
            hats, lrt = [], 0
            for s in range(args.trials):
                x = gen_powerlaw_ints(alpha, xmin, args.n, seed=s)
                pl = stats.fit_powerlaw(x, xmin)
                hats.append(pl.params["alpha"])
                r = stats.likelihood_ratio_test(x, pl, stats.fit_exponential(x, xmin))
                lrt += r.preferred == "powerlaw" and r.p_value < 0.05
            hats = np.array(hats)
            inside = np.mean(np.abs(hats - alpha) <= 0.1)
            print(f"{alpha:5.2f}  {xmin:4d}  {hats.mean():.4f}  {hats.std():.4f}  {inside:6.2f}   "
                  f"{lrt}/{args.trials}")
    print("\nlambda  lambda_hat  lrt_exp  tpl_alpha")
    for lam in (0.1, 0.5, 1.0):
        hits, lam_hat, tpl_alpha = 0, [], []
        for s in range(args.trials):
            g = gen_geometric_ints(lam, 1, args.n, seed=s)
            ex = stats.fit_exponential(g, 1)
            lam_hat.append(ex.params["lambda"])
            r = stats.likelihood_ratio_test(g, stats.fit_powerlaw(g, 1), ex)
            hits += r.preferred == "exponential" and r.p_value < 0.05
            tpl_alpha.append(stats.fit_truncated_powerlaw(g, 1).params["alpha"])
        print(f"{lam:6.2f}  {np.mean(lam_hat):10.4f}  {hits}/{args.trials}    {np.mean(tpl_alpha):.3f}")


if __name__ == "__main__":
    main()
