"""Shared brute-force oracles and instance generators for the test suite.

The oracles are deliberately independent of the library's envelope code: hulls
come from monotone-chain / LP computations over sampled graphs, gradients from
central differences, LP optima from vertex enumeration.
"""

import numpy as np
import pytest

from stfehull import activations as acts
from stfehull.envelope import RawInstance

ALL_ACTIVATIONS = [
    acts.sigmoid(),
    acts.tanh(),
    acts.softsign(),
    acts.penalized_tanh(0.3),
    acts.bipolar_sigmoid(),
    acts.relu(),
    acts.leaky_relu(0.1),
    acts.softplus(),
    acts.elu(0.8),
    acts.elu(1.7),
    acts.selu(),
    acts.silu(),
    acts.maxtanh(),
]

# Activations whose concave envelope starts with a secant on every interval
# (everything except silu, whose left concave tail breaks that form on low
# argument ranges).
STFE_ACTIVATIONS = [a for a in ALL_ACTIVATIONS if a.tag != "silu"]


def upper_hull_1d(act, lo, hi, zq, n=20001):
    """Piecewise-linear upper concave hull of the sampled graph, via the
    monotone-chain construction, interpolated at zq.  The grid includes the
    activation's kink abscissas so hull vertices are not offset by half a
    grid step there."""
    zs = np.linspace(lo, hi, n)
    kinks = [k for k, _l, _r in act.kinks() if lo < k < hi]
    if kinks:
        zs = np.sort(np.concatenate([zs, np.asarray(kinks, dtype=float)]))
    ys = act.value(zs)
    hull = []
    for p in zip(zs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (p[0] - x1) * (y2 - y1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx = np.array([h[0] for h in hull])
    hy = np.array([h[1] for h in hull])
    return np.interp(zq, hx, hy)


def lower_hull_1d(act, lo, hi, zq, n=20001):
    return -upper_hull_1d(acts.reflect(act), -hi, -lo, -np.asarray(zq), n)


def sampled_hull_band(points_x, points_y, Q):
    """Vectorized (lower, upper) hull values at the rows of Q, from the facet
    equations of the sampled graph cloud's convex hull.  Queries must lie in
    the cloud's x-projection (include the box corners in the cloud)."""
    from scipy.spatial import ConvexHull

    eq = ConvexHull(np.column_stack([points_x, points_y])).equations
    A, c, d = eq[:, :-2], eq[:, -2], eq[:, -1]
    up, dn = c > 1e-12, c < -1e-12
    vals_up = -(d[up][None, :] + Q @ A[up].T) / c[up][None, :]
    vals_dn = -(d[dn][None, :] + Q @ A[dn].T) / c[dn][None, :]
    return vals_dn.max(axis=1), vals_up.min(axis=1)


def central_diff(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def random_interval(rng, lo_range=(-6.0, 4.0), width_range=(0.2, 8.0)):
    lo = rng.uniform(*lo_range)
    return acts.Interval(lo, lo + rng.uniform(*width_range))


def random_instance(act, m, rng, center_scale=1.5):
    """General-position raw instance: mixed-sign weights, non-unit box, bias
    placed so the argument range straddles the interesting region."""
    w = rng.uniform(0.4, 3.0, m) * rng.choice([-1.0, 1.0], m)
    lo = rng.uniform(-1.0, 0.5, m)
    box = np.column_stack([lo, lo + rng.uniform(0.3, 1.5, m)])
    mids = (box.sum(axis=1)) / 2.0
    center = rng.normal(0.0, center_scale)
    b = center - float(w @ mids)
    return RawInstance(w, b, act, box)


def random_exact_instance(act, m, rng, center_scale=1.5):
    """Like random_instance, but the recursive construction is the actual hull
    (only silu on wide ranges ever needs rejection)."""
    from stfehull.envelope import normalize

    for _ in range(200):
        raw = random_instance(act, m, rng, center_scale)
        if normalize(raw)[0].framework_exact:
            return raw
    raise RuntimeError(f"no framework-exact instance found for {act.tag}")


def vertex_enumeration_optimum(lp):
    """Exact optimum of a bounded LP with <= 6 variables by enumerating basic
    feasible points of the inequality system (bounds included as rows)."""
    import itertools

    n = lp.n_vars
    cons = []
    for row, comp, rhs in zip(lp.rows, lp.comps, lp.rhs):
        if comp in ("<=", "=="):
            cons.append((np.asarray(row, dtype=float), float(rhs)))
        if comp in (">=", "=="):
            cons.append((-np.asarray(row, dtype=float), -float(rhs)))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lp.upper[j]):
            cons.append((e.copy(), lp.upper[j]))
        if np.isfinite(lp.lower[j]):
            cons.append((-e, -lp.lower[j]))
    A = np.array([c[0] for c in cons])
    b = np.array([c[1] for c in cons])
    best = None
    for comb in itertools.combinations(range(len(cons)), n):
        M = A[list(comb)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b[list(comb)])
        if np.all(A @ x <= b + 1e-8):
            val = float(lp.objective @ x)
            if best is None:
                best = val
            elif lp.sense == "min":
                best = min(best, val)
            else:
                best = max(best, val)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
