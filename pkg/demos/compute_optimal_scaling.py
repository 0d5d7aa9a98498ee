"""Compute-optimal width under a fixed FLOP budget.

Minimizes the width-n misspecified-learner loss bound subject to the budget
d * n * T <= C across four decades of C and fits the growth exponent of the
optimal width.  The exponent approaches 1/2 only in the limit of very large
budgets; at desk scale a logarithmic correction pulls it to about 0.44.
"""

from infolab.harness import sweep_scaling


def main() -> None:
    d, K = 4, 4.0
    sweep = sweep_scaling(d, K, 1e6, 1e10, 9)
    print(f"compute-optimal allocation, d={d}, K={K}")
    print(f"{'C':>12} {'n*':>8} {'T*':>14} {'bound':>10}")
    for c, n, t, v in zip(sweep.c_values, sweep.n_star, sweep.t_star, sweep.bound_value):
        print(f"{c:>12.3g} {int(n):>8} {t:>14.6g} {v:>10.5f}")
    print(f"\nfitted slope of ln n* vs ln C: {sweep.slope:.4f}"
          f" +- {sweep.slope_half_width:.4f}  (limit value 0.5)")


if __name__ == "__main__":
    main()
