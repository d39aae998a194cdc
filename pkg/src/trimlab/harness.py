"""Experiment orchestration: Monte Carlo runs, diagnostic suites, oracles.

All experiments are embarrassingly parallel over seeds.  Workers receive
plain picklable arguments (expressions, not closures) and the coordinator
merges results in seed order, so output is byte-identical for any worker
count.
"""

from __future__ import annotations

import math
import multiprocessing
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import dynamics, engine, observables, spectral, stepfn, trimming
from .bitstream import BitPoint

DEFAULT_GRID_BASE = (1000, 3000, 10000, 30000, 100000, 300000,
                     1000000, 3000000, 10000000)


def default_grid(n_max: int) -> tuple[int, ...]:
    grid = [n for n in DEFAULT_GRID_BASE if n <= n_max]
    if not grid or grid[-1] != n_max:
        grid.append(n_max)
    return tuple(grid)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "weak"
    seed_base: int = 20260823
    seeds: int = 100
    n_max: int = 10 ** 6
    grid: tuple[int, ...] = ()
    psi_expr: Optional[str] = None
    psi_class: Optional[str] = None
    epsilon: float = 0.5
    top_slack: int = 8
    out: Optional[str] = None
    fmt: str = "csv"
    workers: int = 1

    def resolved_grid(self) -> tuple[int, ...]:
        # checkpoints are consumed in ascending order downstream
        if self.grid:
            return tuple(sorted(set(self.grid)))
        return default_grid(self.n_max)

    def psi_spec(self) -> Optional[trimming.PsiSpec]:
        if self.psi_expr is None:
            return None
        return trimming.psi_from_expression(
            self.psi_expr, self.psi_class or "summable")


#: CSV column order for per-(seed, checkpoint) rows.
ROW_FIELDS = ("seed", "n", "b_n", "S_n", "S_n_bn", "T_n_tn", "T_n_rn",
              "ratio_trimmed", "ratio_raw", "max_digit", "exceed_eps",
              "phi_half_n")


def orbit_rows(seed: int, grid: Sequence[int], psi: Optional[trimming.PsiSpec],
               epsilon: float, top_slack: int = 8) -> list[dict]:
    """All checkpoint rows of one orbit."""
    n_max = grid[-1]
    stats = engine.OrbitStats(seed, n_max, induced_min=(n_max + 1) // 2 + 1)
    eps_frac = Fraction(epsilon)
    rows = []
    for n in grid:
        t_n, r_n, d_n = trimming.thresholds(n)
        b = trimming.b_of_n_clamped(n, psi) if psi is not None else 0
        s_n = stats.total_sum(n)
        s_trim = stats.trimmed_sum(n, b)
        t_tn, _ = stats.truncated_sum(n, t_n)
        t_rn, _ = stats.truncated_sum(n, r_n)
        _, exceed = stats.truncated_sum(n, eps_frac * r_n)
        d_float = float(d_n)
        rows.append({
            "seed": seed, "n": n, "b_n": b, "S_n": s_n, "S_n_bn": s_trim,
            "T_n_tn": t_tn, "T_n_rn": t_rn,
            "ratio_trimmed": s_trim / d_float, "ratio_raw": s_n / d_float,
            "max_digit": stats.max_digit(n), "exceed_eps": exceed,
            "phi_half_n": stats.phi_induced((n + 1) // 2),
        })
    return rows


def _rows_worker(args) -> list[dict]:
    seeds, grid, psi_expr, psi_class, epsilon, top_slack = args
    psi = trimming.psi_from_expression(psi_expr, psi_class) if psi_expr else None
    out = []
    for s in seeds:
        out.extend(orbit_rows(s, grid, psi, epsilon, top_slack))
    return out


def collect_rows(config: ExperimentConfig) -> list[dict]:
    """Rows for all seeds, merged in seed order (worker-count invariant)."""
    grid = config.resolved_grid()
    seeds = [config.seed_base + i for i in range(config.seeds)]
    workers = max(1, config.workers)
    if workers == 1:
        return _rows_worker((seeds, grid, config.psi_expr, config.psi_class,
                             config.epsilon, config.top_slack))
    chunks = [seeds[i::workers] for i in range(workers)]
    args = [(c, grid, config.psi_expr, config.psi_class,
             config.epsilon, config.top_slack) for c in chunks if c]
    with multiprocessing.Pool(len(args)) as pool:
        results = pool.map(_rows_worker, args)
    by_seed = {row["seed"]: [] for chunk in results for row in chunk}
    for chunk in results:
        for row in chunk:
            by_seed[row["seed"]].append(row)
    merged = []
    for s in seeds:
        merged.extend(sorted(by_seed[s], key=lambda r: r["n"]))
    return merged


def _quantile(sorted_vals: Sequence[float], q: float) -> float:
    return float(np.quantile(np.asarray(sorted_vals), q))


def iid_checkpoint_sums(base: int, index: int, grid: Sequence[int]) -> list[int]:
    """Partial sums of one i.i.d. oracle sequence at the checkpoints."""
    digits = engine.iid_digits(base * 1000003 + index, grid[-1])
    cs = np.cumsum(digits)
    return [int(cs[n - 1]) for n in grid]


def iid_oracle_sample(seed: int, n: int) -> np.ndarray:
    """n i.i.d. digits with the stationary marginal law (engine-backed)."""
    return engine.iid_digits(seed, n)


def run_weak_convergence(config: ExperimentConfig) -> dict:
    """Raw-sum ratios S_n/(n log n) against the i.i.d. oracle."""
    rows = collect_rows(config)
    grid = config.resolved_grid()
    summary = {"experiment": "weak_convergence", "checkpoints": []}
    oracle = [iid_checkpoint_sums(config.seed_base, i, grid)
              for i in range(config.seeds)]
    for gi, n in enumerate(grid):
        ratios = sorted(r["ratio_raw"] for r in rows if r["n"] == n)
        d_n = n * math.log(n)
        oracle_ratios = sorted(o[gi] / d_n for o in oracle)
        _, r_n, _ = trimming.thresholds(n)
        trunc_rate = sum(1 for r in rows if r["n"] == n and r["max_digit"] > r_n) \
            / max(1, config.seeds)
        # two-sample Kolmogorov distance against the oracle
        both = np.concatenate([ratios, oracle_ratios])
        both.sort()
        f1 = np.searchsorted(ratios, both, side="right") / len(ratios)
        f2 = np.searchsorted(oracle_ratios, both, side="right") / len(oracle_ratios)
        ks = float(np.max(np.abs(f1 - f2)))
        summary["checkpoints"].append({
            "n": n,
            "q25": _quantile(ratios, 0.25),
            "median": _quantile(ratios, 0.5),
            "q75": _quantile(ratios, 0.75),
            "iqr": _quantile(ratios, 0.75) - _quantile(ratios, 0.25),
            "ks_vs_iid": ks,
            "truncation_event_rate": trunc_rate,
            "median_prediction": observables.expect_chi_trunc_approx(
                float(r_n)) / math.log(n),
        })
    return {"rows": rows, "summary": summary}


def run_trimmed_law(config: ExperimentConfig) -> dict:
    """Trimmed-sum ratios with the configured trimming function."""
    if config.psi_expr is None:
        raise ValueError("trimmed-law runs need a psi expression")
    rows = collect_rows(config)
    grid = config.resolved_grid()
    tail = [n for n in grid if n >= 10 ** 4] or list(grid)
    per_seed = []
    for s in range(config.seeds):
        seed = config.seed_base + s
        mine = [r for r in rows if r["seed"] == seed]
        ratios = {r["n"]: r["ratio_trimmed"] for r in mine}
        per_seed.append({
            "seed": seed,
            "final_ratio": ratios[grid[-1]],
            "running_max": max(ratios[n] for n in grid),
            "tail_min": min(ratios[n] for n in tail),
            "tail_max": max(ratios[n] for n in tail),
        })
    finals = sorted(p["final_ratio"] for p in per_seed)
    summary = {
        "experiment": "trimmed_law",
        "psi": config.psi_expr,
        "psi_class": config.psi_class,
        "median_final_ratio": _quantile(finals, 0.5),
        "q25_final_ratio": _quantile(finals, 0.25),
        "q75_final_ratio": _quantile(finals, 0.75),
        "per_seed": per_seed,
    }
    return {"rows": rows, "summary": summary}


def _phi_worker(args) -> list[tuple]:
    seeds, grid = args
    m_max = grid[-1]
    out = []
    for seed in seeds:
        stats = engine.OrbitStats(seed, 2 * m_max + 1024, induced_min=m_max)
        phis = [stats.phi_induced(m) for m in grid]
        steps = stats.phi_steps(m_max).astype(np.float64)
        out.append((seed, phis, float(steps.mean()), float(steps.var(ddof=1))))
    return out


def run_phi_concentration(config: ExperimentConfig) -> dict:
    """Return-time sums against the 2n concentration band.

    The grid counts induced steps here; per seed the reported deviation
    is max over the tail grid of |phi_m - 2m| / m^{3/4}.
    """
    grid = config.resolved_grid()
    seeds = [config.seed_base + i for i in range(config.seeds)]
    workers = max(1, config.workers)
    chunks = [seeds[i::workers] for i in range(workers)]
    args = [(c, grid) for c in chunks if c]
    if len(args) == 1:
        results = [_phi_worker(args[0])]
    else:
        with multiprocessing.Pool(len(args)) as pool:
            results = pool.map(_phi_worker, args)
    by_seed = {rec[0]: rec for chunk in results for rec in chunk}
    tail = [m for m in grid if m >= 10 ** 4] or list(grid)
    per_seed = []
    for seed in seeds:
        _, phis, mean_step, var_step = by_seed[seed]
        dev = max(abs(phis[grid.index(m)] - 2 * m) / m ** 0.75 for m in tail)
        per_seed.append({"seed": seed, "phi_final": phis[-1],
                         "mean_step": mean_step, "var_step": var_step,
                         "tail_deviation": dev})
    devs = [p["tail_deviation"] for p in per_seed]
    summary = {
        "experiment": "phi_concentration",
        "mean_phi_over_m": float(np.mean([p["phi_final"] / grid[-1] for p in per_seed])),
        "mean_step_variance": float(np.mean([p["var_step"] for p in per_seed])),
        "exceed_fraction": float(np.mean([d > 1 for d in devs])),
        "per_seed": per_seed,
    }
    return {"rows": [], "summary": summary}


def _propb_worker(args) -> list[tuple[int, int, int]]:
    seeds, k, ell = args
    out = []
    for seed in seeds:
        stats = engine.OrbitStats(seed, k + ell)
        out.append((seed, stats.total_sum(k), stats.total_sum(k + ell)))
    return out


def property_b_defect(config: ExperimentConfig, k: int, ell: int, t: float,
                      oracle: bool = False, batches: int = 10) -> dict:
    """Characteristic-function factorization defect of partial digit sums.

    Estimates |E exp(itZ_{k+l}/B) - E exp(itZ_k/B) E exp(itZ_l/B)| over
    the seed block, with B = E(T_n^{r_n}) from the closed form at
    n = k + l.  Standard errors come from splitting seeds into batches.
    """
    n = k + ell
    _, r_n, _ = trimming.thresholds(n)
    b_norm = n * observables.expect_chi_trunc_approx(float(r_n))
    seeds = [config.seed_base + i for i in range(config.seeds)]
    if oracle:
        sums = []
        for i, seed in enumerate(seeds):
            digits = engine.iid_digits(seed, n)
            cs = np.cumsum(digits)
            sums.append((seed, int(cs[k - 1]), int(cs[n - 1])))
    else:
        workers = max(1, config.workers)
        chunks = [seeds[i::workers] for i in range(workers)]
        args = [(c, k, ell) for c in chunks if c]
        if len(args) == 1:
            results = [_propb_worker(args[0])]
        else:
            with multiprocessing.Pool(len(args)) as pool:
                results = pool.map(_propb_worker, args)
        by_seed = {rec[0]: rec for chunk in results for rec in chunk}
        sums = [by_seed[s] for s in seeds]
    z_k = np.array([s[1] for s in sums], dtype=np.float64) / b_norm
    z_n = np.array([s[2] for s in sums], dtype=np.float64) / b_norm
    z_l = z_n - z_k  # the increment has the law of Z_l by stationarity
    def defect_of(idx):
        e_n = np.exp(1j * t * z_n[idx]).mean()
        e_k = np.exp(1j * t * z_k[idx]).mean()
        e_l = np.exp(1j * t * z_l[idx]).mean()
        return e_n - e_k * e_l
    full = defect_of(np.arange(len(seeds)))
    batch_vals = []
    for b in range(batches):
        idx = np.arange(b, len(seeds), batches)
        if idx.size:
            batch_vals.append(defect_of(idx))
    batch_vals = np.array(batch_vals)
    se_re = float(batch_vals.real.std(ddof=1) / math.sqrt(len(batch_vals)))
    se_im = float(batch_vals.imag.std(ddof=1) / math.sqrt(len(batch_vals)))
    return {"k": k, "ell": ell, "t": t, "oracle": oracle,
            "defect": abs(full), "defect_re": float(full.real),
            "defect_im": float(full.imag), "se_re": se_re, "se_im": se_im,
            "B_n": b_norm, "seeds": len(seeds)}


def _random_step_function(rng: random.Random, max_pieces: int = 6) -> stepfn.StepFunction:
    """A random dyadic step function (deterministic per rng state)."""
    k = rng.randint(3, 8)
    cuts = sorted({Fraction(rng.randint(1, (1 << k) - 1), 1 << k)
                   for _ in range(rng.randint(1, max_pieces - 1))})
    bp = [Fraction(0)] + cuts + [Fraction(1)]
    vals = [Fraction(rng.randint(-8, 8), rng.randint(1, 4))
            for _ in range(len(bp) - 1)]
    return stepfn.StepFunction(bp, vals)


def run_lemma_suite(config: ExperimentConfig) -> dict:
    """Deterministic structural checks; every defect contract is zero."""
    results = []

    def record(name, checked, defects, t0):
        results.append({"name": name, "checked": checked, "defects": defects,
                        "passed": defects == 0, "seconds": round(time.time() - t0, 3)})

    n_points = min(config.seeds, 2000)
    orbit_len = min(config.n_max, 1000)
    t0 = time.time()
    seeds = [config.seed_base + i for i in range(n_points)]
    digits = engine.digit_matrix(seeds, orbit_len)
    record("digit_halving", n_points * orbit_len,
           engine.halving_defects(digits), t0)

    # negative control: a corrupted digit must trip the checker
    t0 = time.time()
    corrupted = digits[:1].copy()
    target = np.argmax(corrupted[0] >= 4)
    corrupted[0, target + 1] += 1
    record("digit_halving_negative_control", 1,
           0 if engine.halving_defects(corrupted) > 0 else 1, t0)

    t0 = time.time()
    defects = sum(dynamics.verify_beta_indexing(s, 200) for s in seeds[:50])
    record("beta_indexing", 50 * 200, defects, t0)

    t0 = time.time()
    rng = random.Random(config.seed_base)
    affine_defects = 0
    for _ in range(200):
        n_lvl = rng.randint(0, 10)
        num = rng.randrange(1, 1 << 11, 2)  # odd: x has no finite binary expansion issues
        x = Fraction(1, 1 << (n_lvl + 1)) + Fraction(num, 1 << (n_lvl + 12))
        # x lies inside the level J_{n_lvl} = [2^-n-1, 2^-n)
        expected = -1 + (1 << (n_lvl + 1)) * x
        if dynamics.tau_b_q(x) != expected:
            affine_defects += 1
    record("induced_affine_form", 200, affine_defects, t0)

    t0 = time.time()
    sandwich_defects = 0
    raw_lower_defects = 0
    count = 0
    for s in seeds[:200]:
        p = BitPoint(s)
        chi = dynamics.chi_of_point(p)
        ev = observables.eta(p)
        lo, hi = observables.eta_head_bounds(chi)
        if not (lo <= ev <= hi):
            sandwich_defects += 1
        for m in (1, 2, 3):
            for r in (4, 64):
                er = observables.eta_trunc(p, r)
                if not (observables.wm_eval(p, m, r) <= er
                        <= observables.vm_eval(p, m, r)):
                    sandwich_defects += 1
                if observables.wm_eval(p, m, r, shift=0) > er:
                    raw_lower_defects += 1
                count += 1
    record("excursion_sandwich", count, sandwich_defects, t0)

    # negative control: the unshifted z envelope must overshoot somewhere
    record("raw_lower_envelope_overshoots", 1,
           0 if raw_lower_defects > 0 else 1, t0)

    t0 = time.time()
    dual_defects = sum(
        1 for _ in range(30)
        if spectral.duality_check(_random_step_function(rng),
                                  _random_step_function(rng)) != 0)
    record("transfer_duality", 30, dual_defects, t0)

    t0 = time.time()
    vd = 0
    for _ in range(20):
        f = _random_step_function(rng)
        got, bound = spectral.variation_decay_check(f, 6)
        if got > bound:
            vd += 1
    record("variation_decay", 20, vd, t0)

    t0 = time.time()
    witness = spectral.joint_measure_tau(
        [(0, spectral.digit_eq(2)), (1, spectral.digit_eq(1))]) \
        - spectral.digit_eq(2).measure * spectral.digit_eq(1).measure
    record("dependence_witness_1_12", 1, 0 if witness == Fraction(1, 12) else 1, t0)

    t0 = time.time()
    ind_defects = 0
    checked = 0
    for m in (1, 2):
        for j1 in range(4):
            for j2 in range(4):
                e1 = spectral.exit_time_event(j1 + 1)
                e2 = spectral.exit_time_event(j2 + 1)
                joint = spectral.joint_measure_induced(
                    [(0, e1), (m, e2)], stride=m)
                if joint != e1.measure * e2.measure:
                    ind_defects += 1
                checked += 1
    record("induced_independence", checked, ind_defects, t0)

    t0 = time.time()
    alpha_bad = 0
    for n in (1, 4, 8):
        a = spectral.alpha_coefficient(1, n, 1, 3)
        if not spectral.alpha_bound_holds(a, n):
            alpha_bad += 1
    record("alpha_mixing_bound", 3, alpha_bad, t0)

    passed = all(r["passed"] for r in results)
    return {"rows": results, "summary": {"experiment": "lemma_suite",
                                         "all_passed": passed}}


def run_spectral_suite(config: ExperimentConfig) -> dict:
    """Exact operator identities and bounds on fixture grids."""
    rng = random.Random(config.seed_base + 7)
    results = []

    t0 = time.time()
    bad = sum(1 for _ in range(100)
              if spectral.duality_check(_random_step_function(rng),
                                        _random_step_function(rng)) != 0)
    results.append({"name": "duality_100_pairs", "checked": 100,
                    "defects": bad, "passed": bad == 0,
                    "seconds": round(time.time() - t0, 3)})

    t0 = time.time()
    bad = 0
    checked = 0
    for _ in range(50):
        f = _random_step_function(rng)
        for n in range(1, 11):
            got, bound = spectral.variation_decay_check(f, n)
            if got > bound:
                bad += 1
            checked += 1
    results.append({"name": "variation_decay_50x10", "checked": checked,
                    "defects": bad, "passed": bad == 0,
                    "seconds": round(time.time() - t0, 3)})

    t0 = time.time()
    bad = 0
    checked = 0
    for r in (2, 8, 64):
        f = observables.chi_step(r)
        for n in range(1, 13):
            if spectral.correlation(f, f, n) > spectral.correlation_bound(f, f, n):
                bad += 1
            checked += 1
    results.append({"name": "correlation_bound", "checked": checked,
                    "defects": bad, "passed": bad == 0,
                    "seconds": round(time.time() - t0, 3)})

    t0 = time.time()
    n = 64
    _, r_n, _ = trimming.thresholds(n)
    lower, upper = spectral.second_moment_truncated(n, r_n, exact_lag=10)
    import mpmath
    with mpmath.workprec(96):
        cap = mpmath.mpf(9) * n * n * mpmath.log(n) ** 2
        ok = mpmath.mpf(upper.numerator) / upper.denominator <= cap
    results.append({"name": "second_moment_9n2log2", "checked": 1,
                    "defects": 0 if ok else 1, "passed": bool(ok),
                    "seconds": round(time.time() - t0, 3),
                    "enclosure": [float(lower), float(upper)]})

    passed = all(r["passed"] for r in results)
    return {"rows": results, "summary": {"experiment": "spectral_suite",
                                         "all_passed": passed}}
