"""Acceptance checks: exact invariants plus empirical scaling-law fits.

One check per criterion; the `validate` CLI subcommand and the acceptance
test module both call into AcceptanceSuite so they can never drift apart.
Sweep cells are cached inside the suite instance, letting several checks
share the same runs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .algorithms import AlgoConfig, projected_ogd_run, run
from .core import ConvexFn, finite_diff_grad
from .metrics import fit_slope, positive_points
from .oracle import grid_oracle, offline_solve, offline_value, project_birkhoff
from .problems import (
    derive_seed,
    dispatch_problem,
    doubly_stochastic_problem,
    toy_problem,
)

T_GRID = (1250, 2500, 5000, 10000, 20000)
BASE_SEED = 2024

# identical stepsizes for both sides of the dispatch contrast; the theorem
# stepsizes (built from the ball-wide Lipschitz bound) barely move x on this
# problem at desk horizons, so the contrast runs use an engaged, shared pair
CONTRAST_ETA = 0.01
CONTRAST_SIGMA = 100.0
CONTRAST_T = 2880


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.details}"


class AcceptanceSuite:
    """Runs and caches everything the acceptance criteria need."""

    def __init__(
        self,
        t_grid: Tuple[int, ...] = T_GRID,
        toy_seeds: int = 10,
        ds_seeds: int = 5,
        base_seed: int = BASE_SEED,
    ):
        self.t_grid = tuple(t_grid)
        self.toy_seeds = toy_seeds
        self.ds_seeds = ds_seeds
        self.base_seed = base_seed
        self.toy = toy_problem()
        self._cells: Dict[tuple, dict] = {}
        self._ds = None

    @property
    def ds(self):
        if self._ds is None:
            self._ds = doubly_stochastic_problem(d=5)
        return self._ds

    # ------------------------------------------------------------- cells

    def _cell(self, problem, cfg: AlgoConfig, seed: int, with_oracle=True) -> dict:
        """One (problem, config, seed) run reduced to scalar metrics."""
        key = (problem.name, cfg, seed)
        if key in self._cells:
            return self._cells[key]
        trace = run(problem, cfg, seed)
        T = cfg.T
        gmax = trace.g.max(axis=1)
        clip = np.maximum(gmax, 0.0)
        cell = {
            "T": T,
            "sum_g": float(gmax.sum()),
            "sum_clip": float(clip.sum()),
            "sum_clip_sq": float((clip * clip).sum()),
            "max_step_violation": float(clip.max(initial=0.0)),
            "burnin_max_violation": float(clip[T // 10 :].max(initial=0.0)),
            "ball_ok": bool(
                np.linalg.norm(trace.x, axis=1).max()
                <= problem.dom.radius * (1.0 + 1e-12)
            ),
            "cs_ok": bool(
                clip.sum() ** 2 <= T * (clip * clip).sum() * (1.0 + 1e-12) + 1e-18
            ),
            "lambda_err": float("nan"),
        }
        if cfg.variant == "clipped-ogd":
            lhs = trace.lam * trace.sigma * trace.eta
            rhs = np.maximum(trace.g_agg, 0.0)
            cell["lambda_err"] = float(np.abs(lhs - rhs).max())
        if with_oracle:
            ov = offline_value(problem, seed, T)
            cell["regret"] = float(trace.fx.sum() - ov.value)
        self._cells[key] = cell
        return cell

    def toy_cells(self, beta: float, variant="clipped-ogd", t_grid=None) -> List[dict]:
        grid = self.t_grid if t_grid is None else t_grid
        out = []
        for T in grid:
            for i in range(self.toy_seeds):
                cfg = AlgoConfig(variant, T=T, beta=beta)
                out.append(self._cell(self.toy, cfg, derive_seed(self.base_seed, i)))
        return out

    def ds_cells(self) -> List[dict]:
        out = []
        for T in self.t_grid:
            for i in range(self.ds_seeds):
                cfg = AlgoConfig("strong-clipped-ogd", T=T)
                out.append(self._cell(self.ds, cfg, derive_seed(self.base_seed, 100 + i)))
        return out

    def contrast_cells(self) -> Dict[str, dict]:
        problem = dispatch_problem()
        out = {}
        for variant in ("clipped-ogd", "mahdavi-ogd"):
            cfg = AlgoConfig(
                variant,
                T=CONTRAST_T,
                eta_override=CONTRAST_ETA,
                sigma_override=CONTRAST_SIGMA,
            )
            out[variant] = self._cell(problem, cfg, self.base_seed, with_oracle=False)
        return out

    def _mean_series(self, cells: List[dict], key: str) -> List[Tuple[int, float]]:
        byT: Dict[int, list] = {}
        for c in cells:
            byT.setdefault(c["T"], []).append(c[key])
        return [(T, float(np.mean(vs))) for T, vs in sorted(byT.items())]

    @staticmethod
    def _slope(points) -> Tuple[float, str]:
        """Fit after dropping near-zero values; say so when any were dropped."""
        kept = positive_points(points)
        note = "" if len(kept) == len(points) else f" [{len(points) - len(kept)} near-zero pts dropped]"
        return fit_slope(kept), note

    # ------------------------------------------------------------ checks

    def check_lambda_identity(self) -> CheckResult:
        errs = [c["lambda_err"] for c in self.toy_cells(0.5) if not np.isnan(c["lambda_err"])]
        # per-constraint duals must satisfy the identity componentwise too
        cfg = AlgoConfig("clipped-ogd", T=200, aggregation="per_constraint")
        trace = run(dispatch_problem(), cfg, self.base_seed)
        errs.append(
            float(np.abs(trace.lam * trace.sigma * trace.eta - np.maximum(trace.g, 0.0)).max())
        )
        worst = max(errs)
        return CheckResult(
            "1 lambda-update identity",
            worst <= 1e-12,
            f"max |lambda*sigma*eta - [g]_+| = {worst:.2e} (tol 1e-12)",
        )

    def check_ball_feasibility(self) -> CheckResult:
        cells = list(self.toy_cells(0.5)) + list(self.ds_cells())
        cells += list(self.contrast_cells().values())
        for variant in ("mahdavi-ogd", "a-ogd"):
            cfg = AlgoConfig(variant, T=max(self.t_grid))
            cells.append(self._cell(self.toy, cfg, derive_seed(self.base_seed, 0), with_oracle=False))
        bad = sum(not c["ball_ok"] for c in cells)
        return CheckResult(
            "2 ball feasibility",
            bad == 0,
            f"{len(cells)} runs, {bad} with ||x|| > R(1+1e-12)",
        )

    def check_theorem1_scaling(self) -> CheckResult:
        cells = self.toy_cells(0.5)
        s_v, n_v = self._slope(self._mean_series(cells, "sum_clip_sq"))
        s_r, n_r = self._slope(
            [(T, max(v, 0.0)) for T, v in self._mean_series(cells, "regret")]
        )
        ok = s_v <= 0.65 and s_r <= 0.65
        return CheckResult(
            "3 theorem-1 scaling (beta=1/2)",
            ok,
            f"slope sum([g]+)^2 = {s_v:.3f} (<= 0.65){n_v}, "
            f"regret slope = {s_r:.3f} (<= 0.65){n_r}",
        )

    def check_prop3_tradeoff(self) -> CheckResult:
        beta = 2.0 / 3.0
        cells = self.toy_cells(beta)
        s_v, n_v = self._slope(self._mean_series(cells, "sum_clip_sq"))
        s_r, n_r = self._slope(
            [(T, max(v, 0.0)) for T, v in self._mean_series(cells, "regret")]
        )
        ok = s_v <= (1.0 - beta) + 0.15 and s_r <= max(beta, 1.0 - beta) + 0.15
        return CheckResult(
            "4 proposition-3 trade-off (beta=2/3)",
            ok,
            f"slope sum([g]+)^2 = {s_v:.3f} (<= 0.48){n_v}, "
            f"regret slope = {s_r:.3f} (<= 0.82){n_r}",
        )

    def check_theorem2_strong(self) -> CheckResult:
        cells = self.ds_cells()
        s_r, n_r = self._slope(
            [(T, max(v, 0.0)) for T, v in self._mean_series(cells, "regret")]
        )
        s_c, n_c = self._slope(self._mean_series(cells, "sum_clip"))
        ok = s_r <= 0.25 and s_c <= 0.65
        return CheckResult(
            "5 theorem-2 strongly convex",
            ok,
            f"regret slope = {s_r:.3f} (<= 0.25){n_r}, "
            f"sum [g]_+ slope = {s_c:.3f} (<= 0.65){n_c}",
        )

    def check_lemma1_per_step(self) -> CheckResult:
        cells = self.toy_cells(0.5)
        slope, note = self._slope(self._mean_series(cells, "burnin_max_violation"))
        pts = positive_points(self._mean_series(cells, "burnin_max_violation"))
        final = pts[-1][1]
        ok = slope <= 0.0 and final <= 0.05
        return CheckResult(
            "6 lemma-1 per-step violation",
            ok,
            f"slope = {slope:.3f} (<= 0){note}, final max [g]_+ = {final:.4f} (<= 0.05)",
        )

    def check_baseline_contrast(self) -> CheckResult:
        T = max(self.t_grid)
        toy_clip = self._mean_series(self.toy_cells(0.5), "sum_clip_sq")[-1][1]
        mah_cells = self.toy_cells(0.5, variant="mahdavi-ogd", t_grid=(T,))
        toy_mah = self._mean_series(mah_cells, "sum_clip_sq")[-1][1]
        contrast = self.contrast_cells()
        mv_clip = contrast["clipped-ogd"]["max_step_violation"]
        mv_mah = contrast["mahdavi-ogd"]["max_step_violation"]
        ok = toy_clip < toy_mah and mv_clip <= 0.5 * mv_mah
        return CheckResult(
            "7 baseline contrast",
            ok,
            f"toy sum([g]+)^2 {toy_clip:.3f} < {toy_mah:.3f}; "
            f"dispatch max violation {mv_clip:.3f} <= 0.5 * {mv_mah:.3f} "
            f"(shared eta={CONTRAST_ETA}, sigma={CONTRAST_SIGMA})",
        )

    def check_oracle_crosscheck(self) -> CheckResult:
        # toy: penalty solver against the exhaustive grid
        fbar = self.toy.mean_loss(self.base_seed, 50)
        pen = offline_solve(self.toy, fbar, iters=20000)
        grid = grid_oracle(self.toy, fbar, resolution=1e-3)
        d_toy = abs(pen.value - grid.value)
        # matrix problem: penalty route against Dykstra on an off-polytope target
        ds4 = doubly_stochastic_problem(d=4)
        rng = np.random.default_rng(self.base_seed)
        M = rng.uniform(-0.3, 1.2, size=(4, 4))
        f = ConvexFn(
            lambda x: float(0.5 * np.sum((x - M.ravel()) ** 2)),
            lambda x: x - M.ravel(),
        )
        pen4 = offline_solve(ds4, f, iters=30000)
        v_dyk = float(0.5 * np.sum((project_birkhoff(M) - M) ** 2))
        d_ds = abs(pen4.value - v_dyk)
        ok = d_toy <= 1e-3 and d_ds <= 1e-4
        return CheckResult(
            "8 oracle cross-check",
            ok,
            f"toy |penalty - grid| = {d_toy:.2e} (<= 1e-3); "
            f"ds(d=4) |penalty - dykstra| = {d_ds:.2e} (<= 1e-4)",
        )

    def check_gradient_correctness(self) -> CheckResult:
        rng = np.random.default_rng(self.base_seed)
        worst = 0.0
        checked = 0

        def check(fn, sampler, points=100):
            nonlocal worst, checked
            for _ in range(points):
                x = sampler(rng)
                fd = finite_diff_grad(fn, x, h=1e-6)
                sg = np.asarray(fn.subgrad(x), dtype=float)
                err = np.linalg.norm(fd - sg) / max(np.linalg.norm(sg), 1.0)
                worst = max(worst, err)
                checked += 1

        toy = self.toy
        toy_losses = toy.losses(self.base_seed, 5)
        for f in toy_losses:
            check(f, lambda r: r.uniform(-0.7, 0.7, size=2), points=20)
        ds = doubly_stochastic_problem(d=3)
        check(ds.losses(1, 1)[0], lambda r: r.uniform(0, 1, size=9))
        check(ds.gs[0], lambda r: r.uniform(0, 1, size=9))  # row-sum constraint
        disp = dispatch_problem()
        check(disp.losses(0, 1)[0], lambda r: r.uniform(0.0, 15.0, size=3))
        check(disp.gs[0], lambda r: r.uniform(0.0, 15.0, size=3))  # emission
        check(disp.gs[1], lambda r: r.uniform(0.0, 15.0, size=3))  # box
        ok = worst <= 1e-5
        return CheckResult(
            "9 gradient correctness",
            ok,
            f"{checked} finite-difference probes, worst rel err = {worst:.2e} (<= 1e-5)",
        )

    def check_cauchy_schwarz(self) -> CheckResult:
        cells = list(self.toy_cells(0.5)) + list(self.ds_cells())
        cells += list(self.contrast_cells().values())
        bad = sum(not c["cs_ok"] for c in cells)
        return CheckResult(
            "10 Cauchy-Schwarz metric invariant",
            bad == 0,
            f"{len(cells)} traces, {bad} violations of (sum[g]+)^2 <= T*sum([g]+)^2",
        )

    def check_degeneration(self) -> CheckResult:
        slack = ConvexFn(lambda x: float(np.abs(x).sum() - 10.0), lambda x: np.sign(x))
        p = dataclasses.replace(
            self.toy,
            gs=[slack],
            constraint_values=lambda x: np.array([np.abs(x).sum() - 10.0]),
        )
        cfg = AlgoConfig("clipped-ogd", T=500)
        trace = run(p, cfg, self.base_seed)
        ref = projected_ogd_run(p, self.base_seed, 500, eta=trace.eta)
        ok = np.array_equal(trace.x, ref) and np.all(trace.lam == 0.0)
        return CheckResult(
            "11 degeneration to projected OGD",
            ok,
            "bitwise trace match on a never-violated instance"
            if ok
            else "trace diverged from the projected-OGD reference",
        )

    CHECKS = (
        "check_lambda_identity",
        "check_ball_feasibility",
        "check_theorem1_scaling",
        "check_prop3_tradeoff",
        "check_theorem2_strong",
        "check_lemma1_per_step",
        "check_baseline_contrast",
        "check_oracle_crosscheck",
        "check_gradient_correctness",
        "check_cauchy_schwarz",
        "check_degeneration",
    )

    def run_all(self) -> List[CheckResult]:
        return [getattr(self, name)() for name in self.CHECKS]
