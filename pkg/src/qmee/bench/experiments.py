"""Experiment runners behind the ``qmee-bench`` subcommands.

Each runner takes a resolved config (see :mod:`qmee.bench.config`) and
returns an :class:`ExperimentReport`. Random streams are derived from the
master seed with ``SeedSequence`` spawning, one substream per (group,
trial), so results do not depend on how trials are scheduled.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..criteria import correntropy_cost, information_potential, kernel_peak, qmee_potential
from ..datagen import (DEFAULT_LAGS, Background, MixtureNoiseSpec, embed_and_split,
                       gen_linear_regression, gen_mackey_glass, load_csv_dataset, make_rng,
                       minmax_normalize, sample_mixture_noise)
from ..elm import ElmTrainConfig, elm_predict, fit_elm
from ..esn import (DivergenceError, EsnModel, RmsPropConfig, StateCollection, nrmse,
                   run_reservoir, solve_esn_ls, train_esn_qmee)
from ..quantizer import quantize_stream
from ..solvers import (FixedPointConfig, SingularSystemError, rmse_weights, solve_fixed_point_mcc,
                       solve_fixed_point_mee, solve_fixed_point_qmee, solve_mse)
from .report import ExperimentReport, add_aggregates, trial_row

__all__ = [
    "run_linreg_experiment",
    "run_timing_sweep",
    "run_surface_grid",
    "run_esn_experiment",
    "run_elm_experiment",
    "run_experiment",
    "SurfaceGrid",
    "loglog_slope",
]


def _substreams(seed: int, n_groups: int, trials: int) -> list[list[np.random.SeedSequence]]:
    return [g.spawn(trials) for g in np.random.SeedSequence(seed).spawn(n_groups)]


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _warm_up() -> None:
    # compile the quantizer outside any timed region
    quantize_stream(np.zeros(2), 0.0)


# --------------------------------------------------------------------------- linreg

_FIXED_POINT = {"mcc": solve_fixed_point_mcc, "mee": solve_fixed_point_mee,
                "qmee": solve_fixed_point_qmee}


def _case_spec(exp: dict, case: int) -> MixtureNoiseSpec:
    if not exp["noise"]:
        return MixtureNoiseSpec(c=0.0, background=Background.NONE)
    return MixtureNoiseSpec.case(case, c=exp["c"], outlier_var=exp["outlier_var"])


def _fit_linear(criterion: str, x, y, params: dict, exp: dict):
    if criterion == "mse":
        return _timed(solve_mse, x, y) + (None,)
    sigma = params[f"{criterion}_sigma"]
    eps = params["qmee_epsilon"] if criterion == "qmee" else 0.0
    fp = FixedPointConfig(sigma=sigma, epsilon=eps, max_iter=exp["max_iter"], tol=exp["tol"],
                          ridge=exp["ridge"])
    (model, trace), wall = _timed(_FIXED_POINT[criterion], x, y, fp)
    return model, wall, trace


def _linreg_trial(job) -> list:
    exp, params, case, trial, ss = job
    _warm_up()
    data = gen_linear_regression(exp["n"], _case_spec(exp, case), ss, omega=exp["omega"])
    rows = []
    for crit in exp["criteria"]:
        try:
            model, wall, trace = _fit_linear(crit, data.inputs, data.targets, params, exp)
        except SingularSystemError as exc:
            rows.append(trial_row(case, crit, trial, "rmse", np.nan, 0.0,
                                  status=f"singular at iteration {exc.iteration}"))
            continue
        rows.append(trial_row(
            case, crit, trial, "rmse", rmse_weights(model, data.true_omega), wall,
            iterations=None if trace is None else trace.iterations,
            converged=None if trace is None else trace.converged,
            status="diverged" if trace is not None and trace.diverged else "ok"))
    return rows


def run_linreg_experiment(cfg: dict) -> ExperimentReport:
    """Weight-recovery RMSE of each criterion over Monte Carlo trials."""
    exp = cfg["experiment"]
    cases = exp["cases"]
    streams = _substreams(exp["seed"], len(cases), exp["trials"])
    jobs = [(exp, cfg[f"case {case}"], case, k, streams[ci][k])
            for ci, case in enumerate(cases) for k in range(exp["trials"])]
    rows = [r for chunk in _map(_linreg_trial, jobs, exp["workers"]) for r in chunk]
    # trial rows grouped by case then criterion
    order = {(c, k): i for i, (c, k) in enumerate(
        (c, k) for c in cases for k in exp["criteria"])}
    rows.sort(key=lambda r: (order[(r["group"], r["criterion"])], r["trial"]))
    return add_aggregates(ExperimentReport("linreg", cfg, rows))


# --------------------------------------------------------------------------- timing

def loglog_slope(ns, times) -> float | None:
    """Least-squares slope of ``log(time)`` against ``log(N)``; None for one point."""
    ns = np.asarray(ns, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if ns.size < 2:
        return None
    return float(np.polyfit(np.log(ns), np.log(times), 1)[0])


def _batched(fn, min_time: float):
    """Mean time per call over a batch of calls lasting at least ``min_time``."""
    calls = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(calls):
            out = fn()
        total = time.perf_counter() - t0
        if total >= min_time:
            return out, total / calls
        calls *= 2 if total == 0 else max(2, min(10, int(1.2 * min_time / total) + 1))


def _timing_once(mode: str, crit: str, errors, data, exp: dict):
    sigma = exp[f"{crit}_sigma"]
    eps = exp["qmee_epsilon"] if crit == "qmee" else 0.0
    if mode == "evaluate":
        if crit == "mee":
            value, wall = _batched(lambda: information_potential(errors, sigma),
                                   exp["min_batch_time"])
            return value, wall, errors.size, None

        def quantized():
            cb = quantize_stream(errors, eps).codebook
            return qmee_potential(errors, cb, sigma), cb.size

        (value, size), wall = _batched(quantized, exp["min_batch_time"])
        return value, wall, size, None
    fp = FixedPointConfig(sigma=sigma, epsilon=eps, max_iter=exp["max_iter"])
    solver = solve_fixed_point_mee if crit == "mee" else solve_fixed_point_qmee
    (model, trace), wall = _batched(lambda: solver(data.inputs, data.targets, fp),
                                    exp["min_batch_time"])
    return rmse_weights(model, data.true_omega), wall, max(trace.codebook_sizes), trace


def run_timing_sweep(cfg: dict) -> ExperimentReport:
    """Wall time of MEE and QMEE against the sample count.

    ``mode = evaluate`` times one cost evaluation (the O(N^2) information
    potential against quantization plus the O(MN) quantized potential);
    ``mode = train`` times ``max_iter`` fixed-point iterations of linear
    regression. Each repeat times a batch of calls lasting at least
    ``min_batch_time`` seconds and records the mean per call; every size is
    repeated ``trials`` times on the same data and summarized by the median.
    """
    exp = cfg["experiment"]
    ns = list(exp["n"])
    spec = MixtureNoiseSpec.case(exp["case"], c=exp["c"], outlier_var=exp["outlier_var"])
    _warm_up()
    streams = _substreams(exp["seed"], len(ns), 1)
    rows = []
    for i, n in enumerate(ns):
        data = gen_linear_regression(n, spec, streams[i][0])
        errors = data.targets - data.true_omega @ data.inputs
        for crit in ("mee", "qmee"):
            # untimed pass so every repeat sees warm caches
            _timing_once(exp["mode"], crit, errors, data, exp)
            for rep in range(exp["trials"]):
                value, wall, size, trace = _timing_once(exp["mode"], crit, errors, data, exp)
                rows.append(trial_row(
                    n, crit, rep, "potential" if exp["mode"] == "evaluate" else "rmse", value,
                    wall, iterations=None if trace is None else trace.iterations,
                    converged=None if trace is None else trace.converged, codebook_size=size))
    report = add_aggregates(ExperimentReport("timing", cfg, rows), time_stat="median")
    for crit in ("mee", "qmee"):
        med = [report.aggregate(n, crit)["wall_time"] for n in ns]
        report.rows.append({
            "group": "slope", "criterion": crit, "trial": None, "aggregate": True,
            "metric_name": "loglog_slope", "metric": None, "metric_std": None,
            "wall_time": None, "wall_time_std": None, "iterations": None, "converged": None,
            "status": "ok" if len(ns) > 1 else "undefined", "wall_time_slope": loglog_slope(ns, med),
        })
    return report


# --------------------------------------------------------------------------- surface

@dataclass
class SurfaceGrid:
    """Cost values on an ``omega_1 x omega_2`` lattice.

    ``costs[criterion][i, j]`` is the cost at ``(w1[j], w2[i])``.
    """

    w1: np.ndarray
    w2: np.ndarray
    costs: dict
    optima: dict
    target: np.ndarray

    def rows(self):
        for crit, grid in self.costs.items():
            for i, b in enumerate(self.w2):
                for j, a in enumerate(self.w1):
                    yield crit, float(a), float(b), float(grid[i, j])


def _surface_costs(crit: str, errors: np.ndarray, params: dict) -> np.ndarray:
    out = np.empty(errors.shape[0])
    if crit == "mse":
        out[:] = np.mean(errors * errors, axis=1)
    elif crit == "mcc":
        for g, e in enumerate(errors):
            out[g] = correntropy_cost(e, params["mcc_sigma"])
    elif crit == "mee":
        for g, e in enumerate(errors):
            out[g] = information_potential(e, params["mee_sigma"])
    else:
        sigma, eps = params["qmee_sigma"], params["qmee_epsilon"]
        for g, e in enumerate(errors):
            out[g] = qmee_potential(e, quantize_stream(e, eps).codebook, sigma)
    return out


def _one_surface(exp: dict, params: dict, ss) -> SurfaceGrid:
    data = gen_linear_regression(exp["n"], _case_spec(exp, exp["case"]), ss, omega=exp["omega"])
    w1 = np.linspace(*exp["w1_range"], exp["grid"])
    w2 = np.linspace(*exp["w2_range"], exp["grid"])
    a, b = np.meshgrid(w1, w2)
    weights = np.stack([a.ravel(), b.ravel()], axis=1)
    errors = data.targets[None, :] - weights @ data.inputs
    costs, optima = {}, {}
    for crit in exp["criteria"]:
        grid = _surface_costs(crit, errors, params).reshape(a.shape)
        flat = int(np.argmin(grid) if crit == "mse" else np.argmax(grid))
        i, j = np.unravel_index(flat, grid.shape)
        costs[crit] = grid
        optima[crit] = np.array([w1[j], w2[i]])
    return SurfaceGrid(w1, w2, costs, optima, np.asarray(data.true_omega, dtype=np.float64))


def run_surface_grid(cfg: dict) -> tuple[ExperimentReport, SurfaceGrid]:
    """Cost surfaces over a weight lattice for every criterion.

    Each trial draws a fresh dataset; the report holds, per criterion and
    trial, the distance from the grid optimum (argmin for MSE, argmax for
    the entropy criteria) to the true weights. The returned grid is the
    first trial's.
    """
    exp = cfg["experiment"]
    params = cfg[f"case {exp['case']}"]
    _warm_up()
    streams = _substreams(exp["seed"], 1, exp["trials"])[0]
    rows, first = [], None
    for k, ss in enumerate(streams):
        surface, wall = _timed(_one_surface, exp, params, ss)
        first = first or surface
        for crit in exp["criteria"]:
            opt = surface.optima[crit]
            peak = None if crit == "mse" else kernel_peak(params[f"{crit}_sigma"])
            rows.append(trial_row(
                exp["case"], crit, k, "optimum_distance",
                float(np.linalg.norm(opt - surface.target)), wall,
                opt_w1=float(opt[0]), opt_w2=float(opt[1]),
                bound_ok=None if peak is None else bool(np.all(surface.costs[crit] <= peak))))
    return add_aggregates(ExperimentReport("surface", cfg, rows)), first


# --------------------------------------------------------------------------- esn

def _esn_series(exp: dict) -> np.ndarray:
    return gen_mackey_glass(max(DEFAULT_LAGS) + exp["n"] + exp["test"], tau=exp["series_tau"])


def _esn_trial(job) -> list:
    exp, params, alpha, trial, ss, raw = job
    _warm_up()
    s_noise, s_res, s_opt = ss.spawn(3)
    spec = MixtureNoiseSpec.esn(alpha, c=exp["c"]) if exp["noise"] else None
    ds = embed_and_split(raw, spec, train=exp["n"],
                         test=exp["test"], seed=s_noise)
    model = EsnModel.create(ds.train_inputs.shape[1], exp["units"], exp["spectral_radius"],
                            exp["sparsity"], seed=s_res, washout=exp["washout"])
    states = run_reservoir(model, np.vstack([ds.train_inputs, ds.test_inputs]))
    n = exp["n"]
    train = StateCollection(states.phi[:, :n], exp["washout"])
    test_phi = states.phi[:, n:]
    targets = ds.train_targets
    rows = []
    for crit in exp["criteria"]:
        trace, status = None, "ok"
        try:
            if crit == "ls":
                w, wall = _timed(solve_esn_ls, train, targets, pinv=True)
            elif crit == "ridge":
                w, wall = _timed(solve_esn_ls, train, targets, ridge=params["ridge"])
            else:
                rc = RmsPropConfig(
                    eta=exp["eta"], rho=exp["rho"], r=exp["r"], epochs=exp["epochs"],
                    sigma=params[f"{crit}_sigma"],
                    epsilon=params["qmee_epsilon"] if crit == "qmee" else 0.0,
                    seed=_int_seed(s_opt), batch=exp["batch"])
                (w, trace), wall = _timed(train_esn_qmee, train, targets, rc)
        except DivergenceError as exc:
            rows.append(trial_row(alpha, crit, trial, "nrmse", np.nan, 0.0,
                                  iterations=exc.trace.iterations, converged=False,
                                  status="diverged"))
            continue
        pred = (w @ test_phi)[0]
        if trace is not None:
            pred = pred + float(np.mean(targets[exp["washout"]:] - (w @ train.usable)[0]))
        rows.append(trial_row(alpha, crit, trial, "nrmse", nrmse(ds.test_targets, pred), wall,
                              iterations=None if trace is None else trace.iterations,
                              converged=None, status=status))
    return rows


def run_esn_experiment(cfg: dict) -> ExperimentReport:
    """Mackey-Glass one-step prediction NRMSE for each noise level alpha.

    Baselines are the minimum-norm least-squares readout (``ls``) and the
    ridge readout; ``mee`` and ``qmee`` are RMSProp-trained and debiased.
    Aggregate rows carry ``wall_time_ratio``, the mean training time of
    each method over that of ``qmee``.
    """
    exp = cfg["experiment"]
    alphas = exp["alphas"]
    raw = _esn_series(exp)
    streams = _substreams(exp["seed"], len(alphas), exp["trials"])
    jobs = [(exp, cfg[f"alpha {a}"], a, k, streams[ai][k], raw)
            for ai, a in enumerate(alphas) for k in range(exp["trials"])]
    rows = [r for chunk in _map(_esn_trial, jobs, exp["workers"]) for r in chunk]
    order = {(a, c): i for i, (a, c) in enumerate((a, c) for a in alphas for c in exp["criteria"])}
    rows.sort(key=lambda r: (order[(r["group"], r["criterion"])], r["trial"]))
    report = add_aggregates(ExperimentReport("esn", cfg, rows))
    if "qmee" in exp["criteria"]:
        for a in alphas:
            base = report.aggregate(a, "qmee")["wall_time"]
            for crit in exp["criteria"]:
                row = report.aggregate(a, crit)
                row["wall_time_ratio"] = row["wall_time"] / base if base > 0 else None
    return report


# --------------------------------------------------------------------------- elm

def _elm_data(exp: dict, ss):
    """Inputs (N, d), noisy targets and the targets used for scoring."""
    if exp["dataset"]:
        data = load_csv_dataset(exp["dataset"], exp["target"])
        x = data.inputs.T
        return x, data.targets, data.targets
    rng = make_rng(ss)
    x = rng.uniform(-10.0, 10.0, size=(exp["n"], 1))
    clean = np.sinc(x[:, 0] / np.pi)
    spec = MixtureNoiseSpec(c=exp["c"], background=Background.GAUSS_MIX_ALPHA, alpha=0.0,
                            alpha_var=0.01, outlier_var=exp["outlier_var"])
    return x, clean + sample_mixture_noise(exp["n"], spec, rng), clean


def _elm_trial(job) -> list:
    cfg, trial, ss = job
    exp = cfg["experiment"]
    s_data, s_split, s_net = ss.spawn(3)
    x, noisy, clean = _elm_data(exp, s_data)
    if exp["dataset"] and exp["n"] < x.shape[0]:
        keep = make_rng(s_split).permutation(x.shape[0])[: exp["n"]]
        x, noisy, clean = x[keep], noisy[keep], clean[keep]
    perm = make_rng(s_split).permutation(x.shape[0])
    n_train = int(round(exp["train_fraction"] * x.shape[0]))
    tr, te = perm[:n_train], perm[n_train:]
    x_tr, x_te, _ = minmax_normalize(x[tr], x[te])
    y_tr, _, yscale = minmax_normalize(noisy[tr])
    y_tr = y_tr[:, 0]
    y_te = yscale.transform(clean[te][:, None])[:, 0]
    rows = []
    for crit in exp["criteria"]:
        p = cfg[crit]
        tc = ElmTrainConfig(n_hidden=p["n_hidden"], lam=p.get("lam", 0.0),
                            max_iter=exp["max_iter"], sigma=p.get("sigma", 1.0),
                            epsilon=p.get("epsilon", 0.0), seed=_int_seed(s_net), tol=exp["tol"])
        try:
            (model, trace), wall = _timed(fit_elm, x_tr, y_tr, tc, crit)
        except SingularSystemError as exc:
            rows.append(trial_row("synthetic" if not exp["dataset"] else "dataset", crit, trial,
                                  "rmse", np.nan, 0.0, status=f"singular: {exc}"))
            continue
        resid = y_te - elm_predict(model, x_te)
        rows.append(trial_row(
            "synthetic" if not exp["dataset"] else "dataset", crit, trial, "rmse",
            float(np.sqrt(np.mean(resid**2))), wall,
            iterations=None if trace is None else trace.iterations,
            converged=None if trace is None else trace.converged))
    return rows


def run_elm_experiment(cfg: dict) -> ExperimentReport:
    """Test RMSE of ELM output-weight trainers on random train/test splits.

    With ``dataset`` empty, a noisy sinc regression problem is generated
    (impulsive noise on the training targets only); otherwise the CSV file is
    loaded and ``target`` names the target column. Features and targets are
    min-max scaled with training statistics.
    """
    exp = cfg["experiment"]
    streams = _substreams(exp["seed"], 1, exp["trials"])[0]
    jobs = [(cfg, k, ss) for k, ss in enumerate(streams)]
    rows = [r for chunk in _map(_elm_trial, jobs, exp["workers"]) for r in chunk]
    order = {c: i for i, c in enumerate(exp["criteria"])}
    rows.sort(key=lambda r: (order[r["criterion"]], r["trial"]))
    return add_aggregates(ExperimentReport("elm", cfg, rows))


def run_experiment(cfg: dict):
    """Dispatch on ``cfg["task"]``; returns ``(report, extras)``."""
    task = cfg["task"]
    if task == "surface":
        report, grid = run_surface_grid(cfg)
        return report, {"grid": grid}
    runner = {"linreg": run_linreg_experiment, "timing": run_timing_sweep,
              "esn": run_esn_experiment, "elm": run_elm_experiment}[task]
    return runner(cfg), {}
