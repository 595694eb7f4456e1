import numpy as np

from srlk.core import Clustering, Dataset, TableMapping
from srlk.kmeans import enumerate_costs
from srlk.partition import delta_batch


def random_clustering(rng, n, k, ids=None):
    ids = np.arange(n) if ids is None else np.asarray(ids)
    return Clustering(k, ids, rng.integers(0, k, size=len(ids)))


def two_pairs():
    """Two tight pairs, ten apart, on the line."""
    return Dataset([[0.0], [1.0], [10.0], [11.0]])


def unit_square():
    return Dataset([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def _near_spread(X, f, k, eta):
    """(optimal labels, largest difference from them within eta of the optimum), or None on a tie."""
    L, c = enumerate_costs(X, f, k)
    order = np.argsort(c, kind="stable")
    if c[order[1]] - c[order[0]] < 1e-9:
        return None
    near = np.flatnonzero(c < c[order[0]] + eta)
    best = L[order[0]].astype(np.int64)
    return best, float(delta_batch(best, L[near].astype(np.int64), k).max())


def stable_pair(rng, n_range=(6, 10), k_range=(2, 3), targeted_tries=30):
    """A pair of per-point mappings into (0,1)^2 with d_L1 < eta/12, and an eps large
    enough that both are (eta, eps)-unique. Perturbations that move the optimal
    partition are preferred so that many pairs are non-trivial. Returns None when
    the draw is unusable.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    k = int(rng.integers(k_range[0], k_range[1] + 1))
    T = rng.uniform(0.05, 0.95, (n, 2))
    X = Dataset(np.arange(n, dtype=float)[:, None])
    f1 = TableMapping(T)
    L, c = enumerate_costs(X, f1, k)
    gap = np.sort(c)[1] - c.min()
    if gap < 1e-9:
        return None
    eta = gap * np.exp(rng.uniform(np.log(2.5), np.log(1000)))
    first = _near_spread(X, f1, k, eta)
    # pull every point toward its centroid in a random near-optimal rival partition
    rivals = np.flatnonzero((c < c.min() + eta) & (c > c.min()))
    fallback = None
    for t in range(targeted_tries):
        if t % 2 == 0 and rivals.size:
            lab = L[rng.choice(rivals)].astype(np.int64)
            cent = np.array([T[lab == b].mean(axis=0) if np.any(lab == b) else T.mean(axis=0) for b in range(k)])
            P = cent[lab] - T + rng.normal(0, 0.01, (n, 2))
        else:
            P = rng.normal(0, 1, (n, 2))
        P *= rng.uniform(0.5, 0.99) * (eta / 12) / np.linalg.norm(P, axis=1).mean()
        T2 = T + P
        if T2.min() <= 0 or T2.max() >= 1:
            continue
        f2 = TableMapping(T2)
        second = _near_spread(X, f2, k, eta)
        if second is None:
            continue
        eps = max(first[1], second[1]) + 0.01
        moved = delta_batch(first[0], second[0][None, :], k)[0] > 0
        if moved:
            return X, f1, f2, k, eta, eps
        if fallback is None:
            fallback = (X, f1, f2, k, eta, eps)
    return fallback
