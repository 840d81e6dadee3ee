"""Tour of the sectional K-curvature on the canonical families.

Run with ``python demos/curvature_tour.py``.
"""

import numpy as np

from kcurvature import (
    Plane,
    StatStructure,
    SymCubic,
    find_local_max,
    make_h_umbilical,
    make_lambda_quarter,
    sectional_k_curvature,
)
from kcurvature.families import h_umbilical_plane


def random_curvatures(s, count, rng):
    n = s.dim
    return np.array([sectional_k_curvature(s, Plane(*rng.standard_normal((2, n)))) for _ in range(count)])


def main():
    rng = np.random.default_rng(0)

    print("lambda-family: curvature is lambda^2 / 4 on every plane")
    for lam in (1.0, 2.0, -3.0):
        ks = random_curvatures(make_lambda_quarter(4, lam), 500, rng)
        print(f"  lambda={lam:+.1f}  k in [{ks.min():.12f}, {ks.max():.12f}]  lambda^2/4={lam * lam / 4:.12f}")

    print("\nH-umbilical family (n=3): curvature range over sampled planes")
    for lam, mu in ((3.0, 1.0), (2.0, 1.0), (1.0, 1.0), (0.0, 1.0)):
        s = make_h_umbilical(3, lam, mu)
        ks = random_curvatures(s, 5000, rng)
        edge = [sectional_k_curvature(s, Plane(*h_umbilical_plane(3, r, 0.0))) for r in (0.0, 1.0)]
        print(f"  (lambda, mu)=({lam:g}, {mu:g})  sampled [{ks.min():.4f}, {ks.max():.4f}]  extremal planes {edge}")

    print("\nA structure with K(e1, e1) = -3 e1 and K(e2, e2) = -2 e1")
    s = StatStructure.euclidean(SymCubic.from_dict(2, {(0, 0, 0): -3.0, (0, 1, 1): -2.0}))
    k = sectional_k_curvature(s, Plane(np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    local = find_local_max(s, initial=[[0.98, 0.1]])
    best = find_local_max(s, seed=0)
    print(f"  k(e1 ^ e2) = {k}")
    print(f"  critical point near e1: value {local.value:.6f} ({local.kind})")
    print(f"  global maximum of C(x,x,x): {best.value:.6f} at {np.round(best.x, 6)}")


if __name__ == "__main__":
    main()
