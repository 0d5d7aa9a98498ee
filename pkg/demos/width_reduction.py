"""Width reduction of the Dirichlet-process network.

Reduces the infinite-width network to m neurons by multinomial resampling of
the stick-breaking weights and measures the squared function gap against the
analytic K/m bound, with and without snapping neurons to a sphere cover.
"""

from infolab.processes import DirichletNet
from infolab.quantizers import width_reduction_distortion
from infolab.rng import RngStream, SeedSpec


def main() -> None:
    spec = DirichletNet(d=3, scale=2.0, noise_var=1.0)
    stream = RngStream(SeedSpec(5, (("demo", 0),)))
    print(f"Dirichlet-process network, d={spec.d}, K={spec.scale}")
    print(f"{'m':>6} {'gap':>10} {'se':>10} {'K/m':>10}")
    for m in (4, 8, 16, 32, 64, 128):
        mean, se = width_reduction_distortion(spec, m, stream.derive(("m", m)))
        print(f"{m:>6} {mean:>10.5f} {se:>10.5f} {spec.scale / m:>10.5f}")

    spec2 = DirichletNet(d=2, scale=2.0, noise_var=1.0)
    eps, n = 0.3, 32
    mean, se = width_reduction_distortion(spec2, n, stream.derive(("snap", 0)), eps=eps)
    bound = 3.0 * spec2.scale * (1.0 + spec2.d * eps**2) / n
    print(f"\nsnapped to an eps={eps} sphere cover at width {n}:"
          f" gap = {mean:.5f} (se {se:.5f}), bound = {bound:.5f}")


if __name__ == "__main__":
    main()
