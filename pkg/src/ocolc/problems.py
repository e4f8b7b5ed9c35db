"""The three benchmark problems as seeded loss streams with analytic constants.

Each problem carries the constraint list, the ball radius R, the Lipschitz
bound G (a priori, computed over the whole ball, since the stepsize formulas
need it before any data is seen), and optionally the strong-convexity
parameter H1.

Randomness: every stream is a pure function of (seed, t). Generators are
derived through one splitting rule, ``SeedSequence((seed, stream_id))``, and
consume a fixed number of variates per step, so the loss at step t does not
depend on the horizon it was generated for.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import BallDomain, ConvexFn, Vector

_STREAM_LOSS = 0
_STREAM_DEMAND = 1


def derive_seed(seed: int, stream: int) -> int:
    """Map (seed, stream-id) to an independent 64-bit seed.

    The single splitting rule for the whole package; sweep cells and loss
    streams both go through here so concurrent runs stay reproducible.
    """
    return int(np.random.SeedSequence((seed, stream)).generate_state(1, np.uint64)[0])


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stream)))


@dataclass
class ProblemSpec:
    """A constrained online problem: domain, constraints, and a loss stream."""

    name: str
    n: int
    gs: List[ConvexFn]
    dom: BallDomain
    G: float
    H1: Optional[float]
    constraint_values: Callable[[Vector], np.ndarray]
    losses: Callable[[int, int], List[ConvexFn]]  # (seed, T) -> T loss fns
    mean_loss: Callable[[int, int], ConvexFn]  # closed-form average of the T losses
    project_feasible: Optional[Callable[[Vector], Vector]] = None
    offline_solution: Optional[Callable[[int, int], Vector]] = None  # exact x* when known
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.gs)

    def loss_stream(self, seed: int, t: int) -> ConvexFn:
        """Loss at step t (0-based), independent of any horizon."""
        return self.losses(seed, t + 1)[t]

    def x0(self) -> Vector:
        return np.zeros(self.n)


# ---------------------------------------------------------------------------
# toy: 2-D linear losses inside the l1 ball
# ---------------------------------------------------------------------------


def toy_raw_costs(seed: int, T: int) -> np.ndarray:
    """Cost vectors before normalization: uniform on [0, 1.2] x [0, 1]."""
    u = _rng(seed, _STREAM_LOSS).uniform(size=(T, 2))
    return u * np.array([1.2, 1.0])


def toy_costs(seed: int, T: int) -> np.ndarray:
    """Unit-norm cost vectors c_t, row t depending only on (seed, t)."""
    raw = toy_raw_costs(seed, T)
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def project_l1_ball(x: Vector, radius: float = 1.0) -> Vector:
    """Euclidean projection onto {x : ||x||_1 <= radius} (sort-based)."""
    a = np.abs(x)
    if a.sum() <= radius:
        return np.asarray(x, dtype=float)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u > (css - radius) / np.arange(1, a.size + 1))[0][-1]
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(x) * np.maximum(a - theta, 0.0)


def toy_problem(seed: int = 0) -> ProblemSpec:
    """min sum_t c_t.x  s.t.  |x1| + |x2| - 1 <= 0, decisions in the unit ball.

    The l1 unit ball sits inside the l2 unit ball, so R = 1. The constraint
    subgradient is the sign vector (norm at most sqrt(2)), the losses have
    unit norm, hence G = sqrt(2).
    """
    g_l1 = ConvexFn(
        lambda x: float(np.abs(x).sum() - 1.0),
        lambda x: np.sign(x),
        lipschitz_hint=np.sqrt(2.0),
        eval_many=lambda X: np.abs(X).sum(axis=1) - 1.0,
    )

    def losses(s, T):
        C = toy_costs(s, T)
        return [
            ConvexFn(
                lambda x, c=c: float(c @ x),
                lambda x, c=c: c,
                lipschitz_hint=1.0,
                eval_many=lambda X, c=c: X @ c,
            )
            for c in C
        ]

    def mean_loss(s, T):
        cbar = toy_costs(s, T).mean(axis=0)
        return ConvexFn(
            lambda x: float(cbar @ x),
            lambda x: cbar,
            lipschitz_hint=float(np.linalg.norm(cbar)),
            eval_many=lambda X: X @ cbar,
        )

    def offline_solution(s, T):
        # linear loss over the l1 ball: the optimum is the vertex -sign(c_j) e_j
        # at the largest |mean cost| coordinate
        cbar = toy_costs(s, T).mean(axis=0)
        j = int(np.argmax(np.abs(cbar)))
        x = np.zeros(2)
        x[j] = -np.sign(cbar[j])
        return x

    return ProblemSpec(
        name="toy",
        n=2,
        gs=[g_l1],
        dom=BallDomain(radius=1.0, dim=2),
        G=float(np.sqrt(2.0)),
        H1=None,
        constraint_values=lambda x: np.array([np.abs(x).sum() - 1.0]),
        losses=losses,
        mean_loss=mean_loss,
        project_feasible=lambda x: project_l1_ball(x, 1.0),
        offline_solution=offline_solution,
        meta={"seed_hint": seed},
    )


# ---------------------------------------------------------------------------
# doubly stochastic matrix approximation
# ---------------------------------------------------------------------------


def permutation_batch(seed: int, T: int, d: int) -> np.ndarray:
    """T random permutations of range(d), via argsort of iid uniforms.

    argsort keeps per-step variate consumption fixed at d, preserving the
    (seed, t) purity that rejection-sampling shuffles would break.
    """
    u = _rng(seed, _STREAM_LOSS).uniform(size=(T, d))
    return np.argsort(u, axis=1)


def _perm_matrix(perm: np.ndarray) -> np.ndarray:
    d = perm.size
    Y = np.zeros((d, d))
    Y[np.arange(d), perm] = 1.0
    return Y


def doubly_stochastic_problem(d: int = 5, seed: int = 0) -> ProblemSpec:
    """Track random permutation matrices with a doubly stochastic X.

    f_t(X) = 0.5 ||Y_t - X||_F^2 over flattened d x d matrices. Row/column
    sums are written as <=/>= inequality pairs and entrywise nonnegativity,
    m = 4d + d^2 in total. Any doubly stochastic matrix has Frobenius norm
    at most sqrt(d); the ball radius is padded to d (recorded in meta).
    """
    if d < 2:
        raise ValueError(f"need d >= 2, got d={d}")
    n = d * d
    R = float(d)
    G = float(d + np.sqrt(d))  # sup ||X - Y_t|| <= R + sqrt(d); constraint grads <= sqrt(d)

    gs: List[ConvexFn] = []

    def row_grad(i, sign):
        M = np.zeros((d, d))
        M[i, :] = sign
        return M.ravel()

    def col_grad(j, sign):
        M = np.zeros((d, d))
        M[:, j] = sign
        return M.ravel()

    for i in range(d):  # row sums <= 1
        gs.append(
            ConvexFn(
                lambda x, i=i: float(x.reshape(d, d)[i].sum() - 1.0),
                lambda x, i=i: row_grad(i, 1.0),
                lipschitz_hint=float(np.sqrt(d)),
            )
        )
    for i in range(d):  # row sums >= 1
        gs.append(
            ConvexFn(
                lambda x, i=i: float(1.0 - x.reshape(d, d)[i].sum()),
                lambda x, i=i: row_grad(i, -1.0),
                lipschitz_hint=float(np.sqrt(d)),
            )
        )
    for j in range(d):  # column sums <= 1
        gs.append(
            ConvexFn(
                lambda x, j=j: float(x.reshape(d, d)[:, j].sum() - 1.0),
                lambda x, j=j: col_grad(j, 1.0),
                lipschitz_hint=float(np.sqrt(d)),
            )
        )
    for j in range(d):  # column sums >= 1
        gs.append(
            ConvexFn(
                lambda x, j=j: float(1.0 - x.reshape(d, d)[:, j].sum()),
                lambda x, j=j: col_grad(j, -1.0),
                lipschitz_hint=float(np.sqrt(d)),
            )
        )
    for k in range(n):  # entrywise nonnegativity
        def neg_grad(x, k=k):
            v = np.zeros(n)
            v[k] = -1.0
            return v

        gs.append(
            ConvexFn(lambda x, k=k: float(-x[k]), neg_grad, lipschitz_hint=1.0)
        )

    def constraint_values(x):
        X = x.reshape(d, d)
        rows = X.sum(axis=1)
        cols = X.sum(axis=0)
        return np.concatenate([rows - 1.0, 1.0 - rows, cols - 1.0, 1.0 - cols, -x])

    def losses(s, T):
        perms = permutation_batch(s, T, d)
        out = []
        for p in perms:
            y = _perm_matrix(p).ravel()
            out.append(
                ConvexFn(
                    lambda x, y=y: float(0.5 * np.sum((y - x) ** 2)),
                    lambda x, y=y: x - y,
                    lipschitz_hint=G,
                )
            )
        return out

    def mean_target(s, T):
        perms = permutation_batch(s, T, d)
        ybar = np.zeros((d, d))
        for j in range(d):
            counts = np.bincount(perms[:, j], minlength=d)
            ybar[j] = counts / T
        return ybar.ravel()

    def mean_loss(s, T):
        ybar = mean_target(s, T)
        # mean of 0.5||Y_t - X||^2 = 0.5||X||^2 - <Ybar, X> + d/2
        return ConvexFn(
            lambda x: float(0.5 * np.sum(x * x) - ybar @ x + d / 2.0),
            lambda x: x - ybar,
            lipschitz_hint=G,
        )

    def project_feasible(x):
        from .oracle import project_birkhoff

        return project_birkhoff(x.reshape(d, d)).ravel()

    def offline_solution(s, T):
        # the average-loss minimizer is the polytope projection of the mean target
        from .oracle import project_birkhoff

        return project_birkhoff(mean_target(s, T).reshape(d, d)).ravel()

    return ProblemSpec(
        name="doubly-stochastic",
        n=n,
        gs=gs,
        dom=BallDomain(radius=R, dim=n),
        G=G,
        H1=1.0,
        constraint_values=constraint_values,
        losses=losses,
        mean_loss=mean_loss,
        project_feasible=project_feasible,
        offline_solution=offline_solution,
        meta={"d": d, "frobenius_bound": float(np.sqrt(d)), "radius_padded_to": R},
    )


# ---------------------------------------------------------------------------
# economic dispatch
# ---------------------------------------------------------------------------


@dataclass
class DispatchParams:
    """Generator cost/emission coefficients and the demand series (MW)."""

    a: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.12, 0.14]))
    b: np.ndarray = field(default_factory=lambda: np.array([1.5, 1.0, 0.6]))
    d_coef: np.ndarray = field(default_factory=lambda: np.array([0.26, 0.38, 0.37]))
    e_coef: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0]))
    e_max: float = 100.0
    xi: float = 0.5
    x_max: np.ndarray = field(default_factory=lambda: np.array([20.0, 15.0, 18.0]))
    demand: Optional[np.ndarray] = None  # defaults to the synthetic fixture
    demand_rescale: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "d_coef", "e_coef", "x_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
        if self.demand is None:
            self.demand = synthetic_demand()
        self.demand = np.asarray(self.demand, dtype=float) * self.demand_rescale
        if self.demand.size == 0:
            raise ValueError("demand series is empty")
        if np.any(self.demand <= 0):
            raise ValueError("demand must be positive")


def synthetic_demand(
    days: int = 10,
    slots_per_day: int = 288,
    seed: int = 0,
    base: float = 46.0,
    amplitude: float = 9.0,
    noise: float = 1.5,
    floor: float = 5.0,
) -> np.ndarray:
    """Stand-in for the 5-minute interval demand feed: diurnal sinusoid + noise.

    Scaled so magnitudes suit the default generator capacities; real data goes
    through load_demand_csv with a rescale factor instead.
    """
    T = days * slots_per_day
    t = np.arange(T)
    phase = 2.0 * np.pi * (t % slots_per_day) / slots_per_day
    rng = _rng(seed, _STREAM_DEMAND)
    series = base + amplitude * np.sin(phase - 0.5 * np.pi) + noise * rng.standard_normal(T)
    return np.maximum(series, floor)


def load_demand_csv(path) -> np.ndarray:
    """Read a demand series: comma-separated, optional header, demand in the
    last column. Malformed rows are reported with their 1-based line number."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) > 2:
                raise ValueError(f"line {lineno}: expected at most 2 columns, got {len(fields)}")
            raw = fields[-1].strip()
            try:
                values.append(float(raw))
            except ValueError:
                if lineno == 1:  # optional header
                    continue
                raise ValueError(f"line {lineno}: non-numeric demand {raw!r}") from None
    if not values:
        raise ValueError(f"no demand values in {path}")
    return np.array(values)


def dispatch_problem(params: Optional[DispatchParams] = None) -> ProblemSpec:
    """Three-generator economic dispatch with an emission cap and box limits.

    f_t(x) = sum_i (0.5 a_i x_i^2 + b_i x_i) + xi (sum_i x_i - demand_t)^2;
    constraints: total emission <= e_max, then 0 <= x_i <= x_max_i, all fed to
    the Lagrangian as ordinary g_i (only the ball is hard). Demand repeats
    cyclically when the horizon exceeds the series length.
    """
    p = params if params is not None else DispatchParams()
    n = p.x_max.size
    R = 1.1 * float(np.linalg.norm(p.x_max))
    d_max = float(p.demand.max())
    # gradient of f_t: a*x + b + 2 xi (sum x - d_t) * ones, bounded over the ball
    L_f = (
        float(p.a.max()) * R
        + float(np.linalg.norm(p.b))
        + 2.0 * p.xi * np.sqrt(n) * (np.sqrt(n) * R + d_max)
    )
    L_g = max(2.0 * float(p.d_coef.max()) * R + float(np.linalg.norm(p.e_coef)), 1.0)
    G = float(max(L_f, L_g))
    H1 = float(p.a.min())  # the xi coupling adds a PSD term on top

    def emission(x):
        return float(p.d_coef @ (x * x) + p.e_coef @ x)

    gs = [
        ConvexFn(
            lambda x: emission(x) - p.e_max,
            lambda x: 2.0 * p.d_coef * x + p.e_coef,
            lipschitz_hint=L_g,
            eval_many=lambda X: (X * X) @ p.d_coef + X @ p.e_coef - p.e_max,
        )
    ]
    for i in range(n):  # x_i >= 0
        def low_grad(x, i=i):
            v = np.zeros(n)
            v[i] = -1.0
            return v

        gs.append(
            ConvexFn(
                lambda x, i=i: float(-x[i]),
                low_grad,
                lipschitz_hint=1.0,
                eval_many=lambda X, i=i: -X[:, i],
            )
        )
    for i in range(n):  # x_i <= x_max_i
        def up_grad(x, i=i):
            v = np.zeros(n)
            v[i] = 1.0
            return v

        gs.append(
            ConvexFn(
                lambda x, i=i: float(x[i] - p.x_max[i]),
                up_grad,
                lipschitz_hint=1.0,
                eval_many=lambda X, i=i: X[:, i] - p.x_max[i],
            )
        )

    def constraint_values(x):
        return np.concatenate(
            [[p.d_coef @ (x * x) + p.e_coef @ x - p.e_max], -x, x - p.x_max]
        )

    def demand_at(T):
        return p.demand[np.arange(T) % p.demand.size]

    def make_loss(d_t):
        def ev(x):
            s = x.sum()
            return float(0.5 * p.a @ (x * x) + p.b @ x + p.xi * (s - d_t) ** 2)

        def sg(x):
            return p.a * x + p.b + 2.0 * p.xi * (x.sum() - d_t)

        def ev_many(X):
            s = X.sum(axis=1)
            return 0.5 * (X * X) @ p.a + X @ p.b + p.xi * (s - d_t) ** 2

        return ConvexFn(ev, sg, lipschitz_hint=L_f, eval_many=ev_many)

    def losses(s, T):
        return [make_loss(d_t) for d_t in demand_at(T)]

    def mean_loss(s, T):
        d_run = demand_at(T)
        d_bar = float(d_run.mean())
        d_var = float(np.mean((d_run - d_bar) ** 2))

        def ev(x):
            s_ = x.sum()
            return float(
                0.5 * p.a @ (x * x) + p.b @ x + p.xi * ((s_ - d_bar) ** 2 + d_var)
            )

        def sg(x):
            return p.a * x + p.b + 2.0 * p.xi * (x.sum() - d_bar)

        def ev_many(X):
            s_ = X.sum(axis=1)
            return 0.5 * (X * X) @ p.a + X @ p.b + p.xi * ((s_ - d_bar) ** 2 + d_var)

        return ConvexFn(ev, sg, lipschitz_hint=L_f, eval_many=ev_many)

    def project_feasible(x):
        y = np.clip(x, 0.0, p.x_max)
        A = float(p.d_coef @ (y * y))
        B = float(p.e_coef @ y)
        if A + B <= p.e_max or A == 0.0:
            return y
        # shrink toward 0: solve A s^2 + B s = e_max for s in (0, 1]
        s = (-B + np.sqrt(B * B + 4.0 * A * p.e_max)) / (2.0 * A)
        return y * min(s, 1.0)

    return ProblemSpec(
        name="dispatch",
        n=n,
        gs=gs,
        dom=BallDomain(radius=R, dim=n),
        G=G,
        H1=H1,
        constraint_values=constraint_values,
        losses=losses,
        mean_loss=mean_loss,
        project_feasible=project_feasible,
        meta={
            "demand_len": int(p.demand.size),
            "demand_rescale": p.demand_rescale,
            "d_max": d_max,
            "params": p,
        },
    )
