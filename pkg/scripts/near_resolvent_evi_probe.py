"""One-step variational inequalities on grid measures, split by test-point family.

Dirichlet and Dirac test points satisfy both inequalities; points mixed
from the resolvent with a little noise or with the anchor can violate them
by a small margin, because the squared transport distance is not 2-convex
along weight-mixing curves.
"""

import argparse

import numpy as np

from gdaflow.scheme import discrete_evi_residuals
from gdaflow.wasserstein import EntropicBilinearObjective, grid_point, kernel_matrix, uniform

FAMILIES = ("dirichlet", "near-resolvent noise", "dirac", "resolvent-anchor mix")


def draw(kind, rng, m, J, z):
    if kind == 0:
        return rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
    if kind == 1:
        eps = 10 ** rng.uniform(-6, -1)
        return ((1 - eps) * J.x.weights + eps * rng.dirichlet(np.ones(m)),
                (1 - eps) * J.y.weights + eps * rng.dirichlet(np.ones(m)))
    if kind == 2:
        a, b = np.zeros(m), np.zeros(m)
        a[rng.integers(m)] = b[rng.integers(m)] = 1.0
        return a, b
    eps = 10 ** rng.uniform(-4, -0.5)
    return (1 - eps) * J.x.weights + eps * z.x.weights, (1 - eps) * J.y.weights + eps * z.y.weights


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--kernel", default="x*y")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()
    m = 16
    xs = np.linspace(0, 1, m)
    obj = EntropicBilinearObjective(kernel_matrix(args.kernel, xs, xs), 1.0, uniform(xs), uniform(xs))
    w0, v0 = np.exp(-8 * xs), np.exp(8 * xs)
    z = grid_point(xs, w0 / w0.sum(), xs, v0 / v0.sum())
    J = obj.resolvent(z, args.tau, 1e-12).point
    rng = np.random.default_rng(args.seed)
    for kind, label in enumerate(FAMILIES):
        worst = []
        for _ in range(args.draws):
            a, b = draw(kind, rng, m, J, z)
            w = grid_point(xs, a / a.sum(), xs, b / b.sum())
            worst.append(discrete_evi_residuals(obj, z, J, args.tau, [w]).max())
        worst = np.array(worst)
        print(f"{label:24s} max residual {worst.max():+.2e}  violated {np.mean(worst > 0):6.1%}")


if __name__ == "__main__":
    main()
