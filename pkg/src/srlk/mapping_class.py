"""Bounded linear mapping classes: L1 metric, grid covers, pseudo-dimension checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .core import AffineMapping, Dataset, LinearMapping, ValidationError, images_of

MAX_COVER = 10_000
MAX_SHATTER_POINTS = 20
SQUEEZE_MARGIN = 0.01


class CoverTooLarge(ValidationError):
    def __init__(self, required: int, limit: int):
        super().__init__(f"cover would need {required} members (limit {limit})")
        self.required = required
        self.limit = limit


@dataclass(frozen=True)
class MappingClass:
    """Linear maps R^d_in -> R^d_out with entries in [entry_low, entry_high].

    The entry range defaults to [-bound, bound]. ``domain_low``/``domain_high``
    declare the input box used for the affine squeeze into (0, 1)^d_out.
    """

    d_in: int
    d_out: int
    bound: float
    grid_step: float
    domain_low: tuple = None
    domain_high: tuple = None
    entry_low: float = None
    entry_high: float = None

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise ValidationError("d_in and d_out must be >= 1")
        if not self.bound > 0:
            raise ValidationError("entry bound must be positive")
        if not self.grid_step > 0:
            raise ValidationError("grid_step must be positive")
        lo = -self.bound if self.entry_low is None else float(self.entry_low)
        hi = self.bound if self.entry_high is None else float(self.entry_high)
        if not (-self.bound <= lo <= hi <= self.bound):
            raise ValidationError("entry range must lie inside [-bound, bound]")
        object.__setattr__(self, "entry_low", lo)
        object.__setattr__(self, "entry_high", hi)
        low = (-1.0,) * self.d_in if self.domain_low is None else tuple(float(v) for v in self.domain_low)
        high = (1.0,) * self.d_in if self.domain_high is None else tuple(float(v) for v in self.domain_high)
        if len(low) != self.d_in or len(high) != self.d_in or any(a > b for a, b in zip(low, high)):
            raise ValidationError("domain box must have d_in coordinates with low <= high")
        object.__setattr__(self, "domain_low", low)
        object.__setattr__(self, "domain_high", high)

    @property
    def n_params(self) -> int:
        return self.d_in * self.d_out

    def grid_values(self, step: float | None = None) -> np.ndarray:
        """Cell midpoints of the entry range for cells of width at most ``step``."""
        step = self.grid_step if step is None else step
        width = self.entry_high - self.entry_low
        cells = max(1, math.ceil(width / step - 1e-12))
        w = width / cells
        return self.entry_low + w * (np.arange(cells) + 0.5)

    def grid_size(self, step: float | None = None) -> int:
        return len(self.grid_values(step)) ** self.n_params

    def members(self, step: float | None = None, max_size: int = MAX_COVER) -> list[LinearMapping]:
        values = self.grid_values(step)
        size = len(values) ** self.n_params
        if size > max_size:
            raise CoverTooLarge(size, max_size)
        return [
            LinearMapping(np.reshape(entries, (self.d_out, self.d_in)), self.bound)
            for entries in itertools.product(values, repeat=self.n_params)
        ]

    def contains(self, f: LinearMapping) -> bool:
        m = f.matrix
        return (
            m.shape == (self.d_out, self.d_in)
            and bool(np.all(m >= self.entry_low - 1e-12))
            and bool(np.all(m <= self.entry_high + 1e-12))
        )

    def sample(self, rng: np.random.Generator) -> LinearMapping:
        return LinearMapping(rng.uniform(self.entry_low, self.entry_high, (self.d_out, self.d_in)), self.bound)

    def box_l1_max(self) -> float:
        return float(sum(max(abs(a), abs(b)) for a, b in zip(self.domain_low, self.domain_high)))

    def squeeze(self, f: LinearMapping) -> AffineMapping:
        """Compose f with a fixed affine map sending images of the domain box into (0, 1)^d_out."""
        reach = max(abs(self.entry_low), abs(self.entry_high)) * self.box_l1_max()
        scale = 0.5 / (reach * (1 + SQUEEZE_MARGIN)) if reach > 0 else 1.0
        return AffineMapping(f, scale, np.full(self.d_out, 0.5))

    def in_domain(self, X: Dataset) -> bool:
        lo, hi = np.asarray(self.domain_low), np.asarray(self.domain_high)
        return bool(np.all(X.points >= lo) and np.all(X.points <= hi))


def in_unit_cube(f, X: Dataset) -> bool:
    Y = images_of(f, X)
    return bool(np.all(Y > 0) and np.all(Y < 1))


def l1_distance(f1, f2, X: Dataset) -> float:
    """Mean over X of the Euclidean distance between the two images."""
    Y1, Y2 = images_of(f1, X), images_of(f2, X)
    if Y1.shape != Y2.shape:
        raise ValidationError(f"mappings disagree on output dimension: {Y1.shape[1]} vs {Y2.shape[1]}")
    return float(np.linalg.norm(Y1 - Y2, axis=1).mean())


@dataclass(frozen=True)
class Cover:
    members: list
    step: float
    eps: float
    worst_spot_distance: float = 0.0
    values: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]


def _center_mapping(F: MappingClass) -> LinearMapping:
    mid = 0.5 * (F.entry_low + F.entry_high)
    return LinearMapping(np.full((F.d_out, F.d_in), mid), F.bound)


def class_radius(F: MappingClass, X: Dataset, max_vertices: int = 4096) -> float | None:
    """Largest d_L1 from the centre mapping to any class member, or None if too costly.

    d_L1 to the centre is convex in the matrix entries, so the max sits at a box vertex.
    """
    if 2**F.n_params > max_vertices:
        return None
    c = _center_mapping(F)
    corners = (F.entry_low, F.entry_high)
    return max(
        l1_distance(c, LinearMapping(np.reshape(v, (F.d_out, F.d_in)), F.bound), X)
        for v in itertools.product(corners, repeat=F.n_params)
    )


def nearest_grid_member(f: LinearMapping, values: np.ndarray, bound: float) -> LinearMapping:
    idx = np.abs(f.matrix[..., None] - values).argmin(axis=-1)
    return LinearMapping(values[idx], bound)


def build_cover(
    F: MappingClass,
    eps: float,
    X: Dataset | None = None,
    max_size: int = MAX_COVER,
    spot_checks: int = 100,
    seed: int = 0,
) -> Cover:
    """Entry-wise grid that is an eps-cover of F under d_L1 on X.

    Every member of F is within half a cell of a grid midpoint in each entry,
    and ||(A - B) x||_2 <= sqrt(d_out) * max|A - B| * ||x||_1, so cells of width
    2 eps / (sqrt(d_out) * max_x ||x||_1) suffice. Without X the domain box is used.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if X is not None and X.dim != F.d_in:
        raise ValidationError("dataset dimension does not match the class")
    reach = float(np.abs(X.points).sum(axis=1).max()) if X is not None else F.box_l1_max()
    radius = class_radius(F, X) if X is not None else None
    if reach == 0 or (radius is not None and eps >= radius):
        centre = _center_mapping(F)
        return Cover([centre], step=F.entry_high - F.entry_low, eps=eps, values=np.array([centre.matrix[0, 0]]))

    step = 2 * eps / (math.sqrt(F.d_out) * reach)
    values = F.grid_values(step)
    size = len(values) ** F.n_params
    if size > max_size:
        raise CoverTooLarge(size, max_size)
    members = F.members(step, max_size=max_size)

    worst = 0.0
    if X is not None and spot_checks:
        rng = np.random.default_rng(seed)
        for _ in range(spot_checks):
            f = F.sample(rng)
            worst = max(worst, l1_distance(f, nearest_grid_member(f, values, F.bound), X))
        if worst > eps + 1e-12:
            raise AssertionError(f"cover spot check failed: member at d_L1={worst} > eps={eps}")
    return Cover(members, step=step, eps=eps, worst_spot_distance=worst, values=values)


def cover_size_bound_check(F: MappingClass, eps: float, k: int, X: Dataset | None = None, max_size: int = MAX_COVER) -> dict:
    """Size of the constructed eps-cover next to the k! multiplier relating it to
    the cover of the disagreement-indicator class (eps plays the role of eta/12)."""
    cover = build_cover(F, eps, X, max_size=max_size, spot_checks=0)
    mult = math.factorial(k)
    return {
        "cover_radius": eps,
        "implied_eta": 12 * eps,
        "cover_size": len(cover),
        "multiplier": mult,
        "bound_value": mult * len(cover),
        "log_bound": math.log(mult) + math.log(len(cover)),
    }


# --------------------------------------------------------------------------
# pseudo-dimension

@dataclass(frozen=True)
class LinearFunctionClass:
    """Real-valued functions x -> w.x (+ b when affine) with coefficients in [low, high]."""

    dim: int
    low: float | None = None
    high: float | None = None
    affine: bool = False

    @property
    def n_params(self) -> int:
        return self.dim + int(self.affine)

    def features(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if points.shape[1] != self.dim:
            raise ValidationError(f"points have dim {points.shape[1]}, class expects {self.dim}")
        return np.hstack([points, np.ones((len(points), 1))]) if self.affine else points


def coordinate_class(F: MappingClass, i: int = 0) -> LinearFunctionClass:
    """The real-valued class of output coordinate i of F."""
    if not 0 <= i < F.d_out:
        raise ValidationError("coordinate index out of range")
    return LinearFunctionClass(F.d_in, F.entry_low, F.entry_high)


def _pattern_feasible(Phi: np.ndarray, r: np.ndarray, b: Sequence[int], low, high) -> bool:
    """Is there w with w.phi_i >= r_i where b_i = 1 and w.phi_i < r_i where b_i = 0?"""
    m, p = Phi.shape
    A, rhs = [], []
    for i in range(m):
        if b[i]:
            A.append(np.append(-Phi[i], 0.0))
            rhs.append(-r[i])
        else:
            A.append(np.append(Phi[i], 1.0))
            rhs.append(r[i])
    c = np.zeros(p + 1)
    c[-1] = -1.0
    bounds = [(low, high)] * p + [(0.0, 1.0)]
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(rhs), bounds=bounds, method="highs")
    return res.status == 0 and -res.fun > 1e-9


def _shattered_lp(Phi, r, low, high) -> bool:
    return all(_pattern_feasible(Phi, r, b, low, high) for b in itertools.product((0, 1), repeat=len(r)))


def _shattered_grid(values: np.ndarray, r: np.ndarray) -> bool:
    signs = values >= r
    return len({tuple(row) for row in signs}) == 2 ** len(r)


def _threshold_candidates(G: LinearFunctionClass, Phi: np.ndarray, n_grid: int) -> list[np.ndarray]:
    reach = np.abs(Phi).sum(axis=1)
    if G.low is not None and G.high is not None:
        reach = reach * max(abs(G.low), abs(G.high))
    per_point = [np.unique(np.append(np.linspace(-s, s, n_grid), 0.0)) for s in reach]
    return [np.array(r) for r in itertools.product(*per_point)]


def pdim_shatter_check(
    G: LinearFunctionClass,
    S: Sequence[int],
    X: Dataset,
    thresholds: Sequence[float] | None = None,
    method: str = "lp",
    grid_step: float | None = None,
    threshold_grid: int = 5,
    max_enumeration: int = 200_000,
) -> bool:
    """Whether the points X[S] are pseudo-shattered by G.

    With thresholds given, "lp" decides every sign pattern exactly; "grid" only
    searches a coefficient grid of width ``grid_step``. Without thresholds a
    coarse threshold grid is searched and True is returned on the first witness.
    """
    S = list(S)
    if len(S) > MAX_SHATTER_POINTS:
        raise ValidationError(f"|S|={len(S)} exceeds {MAX_SHATTER_POINTS}")
    if not S:
        return True
    Phi = G.features(X.points[S])

    if method == "lp":
        check = lambda r: _shattered_lp(Phi, r, G.low, G.high)
    elif method == "grid":
        if G.low is None or G.high is None or grid_step is None:
            raise ValidationError("grid method needs a bounded class and a grid_step")
        cells = max(1, math.ceil((G.high - G.low) / grid_step))
        coef = G.low + (G.high - G.low) / cells * (np.arange(cells) + 0.5)
        if len(coef) ** G.n_params > max_enumeration:
            raise ValidationError(f"class grid has {len(coef) ** G.n_params} members (limit {max_enumeration})")
        W = np.array(list(itertools.product(coef, repeat=G.n_params)))
        values = W @ Phi.T
        check = lambda r: _shattered_grid(values, r)
    else:
        raise ValidationError(f"unknown method {method!r}")

    if thresholds is not None:
        r = np.asarray(thresholds, dtype=float)
        if r.shape != (len(S),):
            raise ValidationError("need one threshold per point")
        return check(r)
    candidates = _threshold_candidates(G, Phi, threshold_grid)
    if len(candidates) > max_enumeration:
        raise ValidationError("threshold grid too large")
    return any(check(r) for r in candidates)


def pdim_vector(F: MappingClass) -> int:
    """n * max_i Pdim(F_i); each coordinate class of a linear class is a d_in-dim vector space."""
    return F.d_out * F.d_in


def pdim_report(F: MappingClass) -> dict:
    return {"per_coordinate": [F.d_in] * F.d_out, "vector": pdim_vector(F)}


def largest_shattered_size(G: LinearFunctionClass, X: Dataset, max_size: int | None = None, threshold_grid: int = 5) -> int:
    """Largest subset of X found to be pseudo-shattered (a witness-based lower bound)."""
    max_size = min(X.n, MAX_SHATTER_POINTS if max_size is None else max_size)
    best = 0
    for size in range(1, max_size + 1):
        if not any(pdim_shatter_check(G, S, X, threshold_grid=threshold_grid) for S in itertools.combinations(range(X.n), size)):
            break
        best = size
    return best
