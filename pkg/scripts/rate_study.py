"""Zero-cell rate curve for the volume size functional on a finer intensity grid.

Shows how slowly gamma^{-1} ln P(volume >= a) approaches its limit.
"""
import argparse

from sphertess.estimators import estimate_rate
from sphertess.functionals import SizeSpec
from sphertess.sphere_core import cap_volume


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.2, help="cap radius fixing a = sigma(B(o, alpha))")
    ap.add_argument("--gammas", default="0.5,1,1.5,2,3,4")
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ns = ap.parse_args()
    gammas = [float(g) for g in ns.gammas.split(",")]
    c = estimate_rate(SizeSpec("Volume"), cap_volume(2, ns.alpha), gammas, ns.n, ns.seed)
    print(f"target {c.target:.4f}")
    for p in c.points:
        lo, hi = p.ci
        flag = " (starved)" if p.starved else ""
        print(f"gamma {p.gamma_s:5.2f}  p {p.p_hat:.3e} [{lo:.3e}, {hi:.3e}]  rate {p.rate:8.4f}{flag}")


if __name__ == "__main__":
    main()
