"""Online primal-dual algorithms and the run loop.

Four variants:

* ``clipped-ogd``      constant stepsize, dual set by explicitly maximizing the
                       clipped augmented Lagrangian: lambda = [g(x)]_+ / (sigma*eta).
* ``strong-clipped-ogd``  same dual rule with time-varying eta_t = 1/(H1 (t+1))
                       and theta_t = eta_t (m+1) G^2, for strongly convex losses.
* ``mahdavi-ogd``      simultaneous gradient descent/ascent on the augmented
                       Lagrangian with a single stepsize; dual projected to >= 0.
* ``a-ogd``            gradient descent/ascent with distinct primal/dual stepsize
                       schedules and a decaying dual regularization theta_t,
                       always on the max-aggregated scalar constraint.

The baselines run with either the plain Lagrangian term lambda*g (their
original form, the default) or the clipped term lambda*[g]_+ (the retrofit).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .aggregation import logsumexp_aggregate, max_aggregate
from .core import ConvexFn, lagrangian_grad_x, project_ball
from .problems import ProblemSpec

VARIANTS = ("clipped-ogd", "strong-clipped-ogd", "mahdavi-ogd", "a-ogd")
_ALIASES = {"strong": "strong-clipped-ogd", "ogd": "mahdavi-ogd", "aogd": "a-ogd"}

# best-effort fault injection for negative-control tests: corrupts the dual
# update of clipped-ogd so the lambda-identity check must fail
FAULT_LAMBDA_ENV = "OCOLC_FAULT_LAMBDA"


class RunError(RuntimeError):
    """Raised when a run aborts; carries the 1-based step index."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


def canonical_variant(name: str) -> str:
    name = name.lower().replace("_", "-")
    name = _ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {VARIANTS}")
    return name


@dataclass(frozen=True)
class AlgoConfig:
    """Run configuration. beta trades regret vs violation; alpha enters sigma."""

    variant: str
    T: int
    beta: float = 0.5
    alpha: float = 0.5
    lagrangian: Optional[str] = None  # None -> clipped for our algorithms, plain for baselines
    aggregation: str = "max"  # 'max' | 'logsumexp' | 'per_constraint'
    eta_override: Optional[float] = None
    sigma_override: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.T < 1:
            raise ValueError(f"horizon T must be >= 1, got {self.T}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.aggregation not in ("max", "logsumexp", "per_constraint"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        lag = self.lagrangian
        if lag is None:
            lag = "clipped" if self.variant in ("clipped-ogd", "strong-clipped-ogd") else "plain"
        if lag not in ("clipped", "plain"):
            raise ValueError(f"unknown lagrangian {lag!r}")
        if lag == "plain" and self.variant in ("clipped-ogd", "strong-clipped-ogd"):
            raise ValueError(f"{self.variant} is defined by the clipped Lagrangian")
        if self.variant == "a-ogd" and self.aggregation == "per_constraint":
            raise ValueError("a-ogd uses a scalar dual; pick max or logsumexp aggregation")
        object.__setattr__(self, "lagrangian", lag)


def theorem1_params(m: int, G: float, R: float, alpha: float, T: int) -> tuple:
    """Closed-form (sigma, eta) for the balanced convex case.

    sigma = (m+1) G^2 / (2 (1-alpha)),  eta = 1 / (G sqrt((m+1) R T)).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if m < 1 or G <= 0 or R <= 0 or T < 1:
        raise ValueError("m, G, R, T must be positive")
    sigma = (m + 1) * G * G / (2.0 * (1.0 - alpha))
    eta = 1.0 / (G * np.sqrt((m + 1) * R * T))
    return sigma, float(eta)


def tradeoff_eta(m: int, G: float, R: float, beta: float, T: int) -> float:
    """eta = 1 / (T^beta G sqrt(R (m+1))); equals the balanced eta at beta = 1/2."""
    if m < 1 or G <= 0 or R <= 0 or T < 1:
        raise ValueError("m, G, R, T must be positive")
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    return float(1.0 / (T**beta * G * np.sqrt(R * (m + 1))))


@dataclass
class StepState:
    """State carried between steps; vals/agg are the constraint values at x."""

    t: int
    x: np.ndarray
    lam: np.ndarray
    vals: np.ndarray  # raw g_i(x), length m
    agg: np.ndarray  # dual-facing constraint values, length k


@dataclass
class RunTrace:
    """Per-step records of a single run plus the resolved parameters."""

    problem: str
    variant: str
    seed: int
    config: AlgoConfig
    t: np.ndarray  # (T,)
    x: np.ndarray  # (T, n)
    fx: np.ndarray  # (T,)
    g: np.ndarray  # (T, m) raw constraint values
    g_agg: np.ndarray  # (T, k) dual-facing values
    lam: np.ndarray  # (T, k)
    eta: Optional[float]
    sigma: Optional[float]
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.t.size


class _View:
    """Dual-facing constraint functions under the configured aggregation."""

    def __init__(self, problem: ProblemSpec, mode: str):
        self.mode = mode
        m = problem.m
        if mode == "per_constraint":
            self.fns = list(problem.gs)
            self.k = m
            self.G_eff = problem.G
        elif mode == "max":
            self.fns = [max_aggregate(problem.gs, problem.constraint_values)]
            self.k = 1
            self.G_eff = problem.G
        elif mode == "logsumexp":
            self.fns = [logsumexp_aggregate(problem.gs, problem.constraint_values)]
            self.k = 1
            # the smoothed constraint has Lipschitz bound sqrt(m) G
            self.G_eff = float(np.sqrt(m)) * problem.G
        else:
            raise ValueError(mode)

    def agg_from_raw(self, raw: np.ndarray) -> np.ndarray:
        if self.mode == "per_constraint":
            return raw
        if self.mode == "max":
            return np.array([raw.max()])
        top = raw.max()
        return np.array([top + np.log(np.sum(np.exp(raw - top)))])


class _Algorithm:
    """Shared machinery: aggregation view, state init, gradient checks."""

    def __init__(self, problem: ProblemSpec, cfg: AlgoConfig):
        self.problem = problem
        self.cfg = cfg
        self.view = _View(problem, cfg.aggregation)
        self.m_eff = self.view.k
        self.G_eff = self.view.G_eff

    def _resolve_constant_params(self):
        cfg = self.cfg
        self.sigma = (
            cfg.sigma_override
            if cfg.sigma_override is not None
            else (self.m_eff + 1) * self.G_eff**2 / (2.0 * (1.0 - cfg.alpha))
        )
        self.eta = (
            cfg.eta_override
            if cfg.eta_override is not None
            else tradeoff_eta(self.m_eff, self.G_eff, self.problem.dom.radius, cfg.beta, cfg.T)
        )

    def _observe(self, x: np.ndarray) -> tuple:
        raw = np.asarray(self.problem.constraint_values(x), dtype=float)
        return raw, self.view.agg_from_raw(raw)

    def init_lambda(self, agg: np.ndarray) -> np.ndarray:
        return np.zeros(self.view.k)

    def init_state(self, x0: Optional[np.ndarray] = None) -> StepState:
        x = self.problem.x0() if x0 is None else np.asarray(x0, dtype=float)
        raw, agg = self._observe(x)
        return StepState(t=1, x=x, lam=self.init_lambda(agg), vals=raw, agg=agg)

    def _check(self, grad: np.ndarray, t: int) -> np.ndarray:
        if not np.all(np.isfinite(grad)):
            raise RunError(t, "non-finite Lagrangian gradient")
        return grad

    def step(self, state: StepState, f_t: ConvexFn) -> StepState:
        raise NotImplementedError


class ClippedOGD(_Algorithm):
    """Constant-stepsize algorithm with the explicit dual maximizer."""

    def __init__(self, problem, cfg):
        super().__init__(problem, cfg)
        self._resolve_constant_params()
        self._fault = os.environ.get(FAULT_LAMBDA_ENV, "") not in ("", "0")

    def _dual(self, agg: np.ndarray) -> np.ndarray:
        lam = np.maximum(agg, 0.0) / (self.sigma * self.eta)
        if self._fault:
            lam = lam * 1.5 + 1e-3
        return lam

    def init_lambda(self, agg):
        return self._dual(agg)

    def step(self, state, f_t):
        grad = self._check(
            lagrangian_grad_x(f_t, self.view.fns, state.x, state.lam), state.t
        )
        x_new = project_ball(state.x - self.eta * grad, self.problem.dom)
        raw, agg = self._observe(x_new)
        return StepState(state.t + 1, x_new, self._dual(agg), raw, agg)


class StrongClippedOGD(_Algorithm):
    """Time-varying stepsize eta_t = 1/(H1 (t+1)), theta_t = eta_t (m+1) G^2."""

    def __init__(self, problem, cfg):
        super().__init__(problem, cfg)
        if cfg.eta_override is not None or cfg.sigma_override is not None:
            raise ValueError("the strongly convex variant has no constant eta/sigma to override")
        if problem.H1 is None or problem.H1 <= 0:
            raise ValueError(
                f"{cfg.variant} needs a strongly convex problem (H1 > 0); "
                f"{problem.name} has H1={problem.H1}"
            )
        self.H1 = float(problem.H1)

    def eta_t(self, t: int) -> float:
        return 1.0 / (self.H1 * (t + 1))

    def theta_t(self, t: int) -> float:
        return self.eta_t(t) * (self.m_eff + 1) * self.G_eff**2

    def init_lambda(self, agg):
        return np.maximum(agg, 0.0) / self.theta_t(1)

    def step(self, state, f_t):
        grad = self._check(
            lagrangian_grad_x(f_t, self.view.fns, state.x, state.lam), state.t
        )
        x_new = project_ball(state.x - self.eta_t(state.t) * grad, self.problem.dom)
        raw, agg = self._observe(x_new)
        lam = np.maximum(agg, 0.0) / self.theta_t(state.t + 1)
        return StepState(state.t + 1, x_new, lam, raw, agg)


class _GradientAscentDual(_Algorithm):
    """Shared simultaneous descent/ascent step for the two baselines."""

    def _primal_grad(self, state, f_t):
        if self.cfg.lagrangian == "clipped":
            return lagrangian_grad_x(f_t, self.view.fns, state.x, state.lam)
        # plain Lagrangian: lambda_i * grad g_i regardless of feasibility
        grad = np.asarray(f_t.subgrad(state.x), dtype=float)
        for lam_i, g in zip(state.lam, self.view.fns):
            if lam_i > 0.0:
                grad = grad + lam_i * np.asarray(g.subgrad(state.x), dtype=float)
        return grad

    def _dual_residual(self, state, theta):
        vals = state.agg if self.cfg.lagrangian == "plain" else np.maximum(state.agg, 0.0)
        return vals - theta * state.lam

    def _advance(self, state, f_t, eta_x, dual_step, theta):
        grad = self._check(self._primal_grad(state, f_t), state.t)
        x_new = project_ball(state.x - eta_x * grad, self.problem.dom)
        lam = np.maximum(state.lam + dual_step * self._dual_residual(state, theta), 0.0)
        raw, agg = self._observe(x_new)
        return StepState(state.t + 1, x_new, lam, raw, agg)


class MahdaviOGD(_GradientAscentDual):
    """Single stepsize eta on both players; dual regularization sigma*eta."""

    def __init__(self, problem, cfg):
        super().__init__(problem, cfg)
        self._resolve_constant_params()

    def step(self, state, f_t):
        return self._advance(state, f_t, self.eta, self.eta, self.sigma * self.eta)


class AOGD(_GradientAscentDual):
    """Distinct primal/dual schedules on the max-aggregated constraint.

    The primal stepsize is the constant eta ~ 1/T^beta; the dual ascent runs
    at mu_t = eta0 * t^(beta-1) against a decaying regularization
    theta_t = sigma * eta0 * t^(-beta), with eta0 = 1/(G sqrt(R (m+1))).
    """

    def __init__(self, problem, cfg):
        super().__init__(problem, cfg)
        self._resolve_constant_params()
        self.eta0 = 1.0 / (self.G_eff * np.sqrt(problem.dom.radius * (self.m_eff + 1)))
        self.theta0 = self.sigma * self.eta0

    def theta_t(self, t: int) -> float:
        return self.theta0 * t ** (-self.cfg.beta)

    def mu_t(self, t: int) -> float:
        return self.eta0 * t ** (self.cfg.beta - 1.0)

    def step(self, state, f_t):
        return self._advance(
            state, f_t, self.eta, self.mu_t(state.t), self.theta_t(state.t)
        )


_CLASSES = {
    "clipped-ogd": ClippedOGD,
    "strong-clipped-ogd": StrongClippedOGD,
    "mahdavi-ogd": MahdaviOGD,
    "a-ogd": AOGD,
}


def make_algorithm(problem: ProblemSpec, cfg: AlgoConfig) -> _Algorithm:
    return _CLASSES[cfg.variant](problem, cfg)


def run(problem: ProblemSpec, cfg: AlgoConfig, seed: int) -> RunTrace:
    """Run one algorithm for T steps from the ball center. Deterministic in seed."""
    algo = make_algorithm(problem, cfg)
    losses = problem.losses(seed, cfg.T)
    trace, _ = _drive(problem, algo, losses, algo.init_state(), seed, meta={})
    return trace


def _drive(problem, algo, losses, state, seed, meta, trace_arrays=None, offset=0):
    """Advance through `losses`, recording each visited state; the step after
    the final recorded row still executes so callers can carry the state on."""
    T = len(losses)
    cfg = algo.cfg
    if trace_arrays is None:
        total = T + offset
        trace_arrays = {
            "x": np.empty((total, problem.n)),
            "fx": np.empty(total),
            "g": np.empty((total, problem.m)),
            "g_agg": np.empty((total, algo.view.k)),
            "lam": np.empty((total, algo.view.k)),
        }
    a = trace_arrays
    for i, f_t in enumerate(losses):
        row = offset + i
        a["x"][row] = state.x
        a["fx"][row] = f_t.eval(state.x)
        a["g"][row] = state.vals
        a["g_agg"][row] = state.agg
        a["lam"][row] = state.lam
        state = algo.step(state, f_t)
    total = offset + T
    meta = dict(meta)
    meta.setdefault("g_bar_x1", float(a["g_agg"][0].max()))
    meta.setdefault("m_eff", algo.m_eff)
    meta.setdefault("G_eff", algo.G_eff)
    trace = RunTrace(
        problem=problem.name,
        variant=cfg.variant,
        seed=seed,
        config=cfg,
        t=np.arange(1, total + 1),
        x=a["x"][:total],
        fx=a["fx"][:total],
        g=a["g"][:total],
        g_agg=a["g_agg"][:total],
        lam=a["lam"][:total],
        eta=getattr(algo, "eta", None),
        sigma=getattr(algo, "sigma", None),
        meta=meta,
    )
    return trace, state


def projected_ogd_run(problem: ProblemSpec, seed: int, T: int, eta: float) -> np.ndarray:
    """Plain projected OGD reference, x_{t+1} = proj(x_t - eta grad f_t(x_t)).

    Returns the (T, n) iterate matrix; used to verify that clipped-ogd
    degenerates to it bitwise on never-violated instances.
    """
    losses = problem.losses(seed, T)
    x = problem.x0()
    xs = np.empty((T, problem.n))
    for i, f_t in enumerate(losses):
        xs[i] = x
        x = project_ball(x - eta * np.asarray(f_t.subgrad(x), dtype=float), problem.dom)
    return xs


def doubling_epochs(total: int) -> List[int]:
    """Epoch lengths 1, 2, 4, ... covering `total` steps (last one truncated)."""
    if total < 1:
        raise ValueError("total steps must be >= 1")
    out, nominal, remaining = [], 1, total
    while remaining > 0:
        out.append(min(nominal, remaining))
        remaining -= out[-1]
        nominal *= 2
    return out


def doubling_run(
    problem: ProblemSpec,
    cfg_factory: Callable[[int], AlgoConfig],
    total: int,
    seed: int,
) -> RunTrace:
    """Horizon-free wrapper: run epochs of doubling length with per-epoch
    parameters from cfg_factory(nominal_length).

    x carries across epoch boundaries; lambda resets to zero (its scale is
    tied to the epoch's sigma*eta). The loss sequence is the same one run()
    would see for the full horizon.
    """
    lengths = doubling_epochs(total)
    losses = problem.losses(seed, total)
    arrays = None
    offset = 0
    x_carry = None
    epoch_meta = []
    trace = None
    nominal = 1
    for length in lengths:
        cfg = cfg_factory(nominal)
        if cfg.T != nominal:
            raise ValueError(f"cfg_factory({nominal}) returned T={cfg.T}")
        algo = make_algorithm(problem, cfg)
        state = algo.init_state(x_carry)
        state.lam = np.zeros(algo.view.k)  # epoch boundary: duals reset
        if arrays is None:
            arrays = {
                "x": np.empty((total, problem.n)),
                "fx": np.empty(total),
                "g": np.empty((total, problem.m)),
                "g_agg": np.empty((total, algo.view.k)),
                "lam": np.empty((total, algo.view.k)),
            }
        trace, state = _drive(
            problem,
            algo,
            losses[offset : offset + length],
            state,
            seed,
            meta={},
            trace_arrays=arrays,
            offset=offset,
        )
        epoch_meta.append(
            {"nominal": nominal, "length": length, "eta": getattr(algo, "eta", None)}
        )
        offset += length
        x_carry = state.x
        nominal *= 2
    trace.meta["epochs"] = epoch_meta
    return trace
