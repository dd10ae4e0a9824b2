"""Command-line interface: eight subcommands over the library.

frontier      CSV of the realizability curve on a kappa grid
lambda-sim    CSV of heuristic spectral bounds over random interaction draws
sde           CSV time series plus a JSON summary of time averages
gibbs-sample  JSON Metropolis estimate of the site mean under one draw
free-energy   JSON disorder-averaged per-site log partition function
parisi-eval   JSON single evaluation of the variational functional
parisi-opt    JSON saddle-point search report
rpc-verify    JSON cascade Monte-Carlo check of the recursion value

Conventions shared by every subcommand: files are written atomically
(temp file + rename); reruns with identical flags and seeds are
byte-identical; JSON numbers carry 17 significant digits and validate
against the versioned schemas shipped under lvglass/schemas; CSV numbers
carry 10 significant digits and the full parameter set rides along in
``# key=value`` header lines.  A flat ``key=value`` config file may
supply any flag's value; explicit flags win.  When --output is omitted
the file lands in $LVGLASS_OUT_DIR (default: the working directory).

Exit codes: 0 success, 2 invalid arguments or config, 3 numerical
failure (non-convergence, explosion, failed quadrature self-check).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import jsonschema
import numpy as np

from lvglass import SCHEMA_VERSION, __version__
from lvglass.frontier import EnsembleParams, NoRootError, frontier_curve, lambda_plus
from lvglass.gibbs import (
    GibbsTarget,
    MCMCError,
    QuadratureConvergenceError,
    _batch_se,
    free_energy_disorder_avg,
    gelman_rubin,
    mcmc_sample,
)
from lvglass.parisi import (
    MeanFieldModel,
    ParisiArgs,
    ParisiMeasure,
    QuadratureDoublingError,
    objective,
    quadratic_correction,
    recursion_x0,
    saddle_search,
)
from lvglass.randmat import InteractionMatrix, lambda_plus_max, truncate_interaction
from lvglass.rpc import verify_prpc
from lvglass.sde import (
    ModelParams,
    TrajectoryExplodedError,
    log_time_average,
    simulate,
    time_average,
)

OUT_DIR_ENV = "LVGLASS_OUT_DIR"
KAPPA_SUP = 1.0 / math.sqrt(2.0)

_NUMERICAL_ERRORS = (
    MCMCError,
    QuadratureConvergenceError,
    QuadratureDoublingError,
    TrajectoryExplodedError,
    NoRootError,
    ArithmeticError,
)


class CliError(ValueError):
    """Bad flags, config, or argument files; maps to exit code 2."""


# ---------------------------------------------------------------------------
# deterministic serialization


def _float17(x: float) -> str:
    return format(x, ".17g") if math.isfinite(x) else "null"


def _render_json(value, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        body = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {_render_json(v, indent + 1)}"
            for k, v in value.items()
        )
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        seq = list(value)
        if not seq:
            return "[]"
        body = ",\n".join(f"{pad}  {_render_json(v, indent + 1)}" for v in seq)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _float17(float(value))
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _json_text(obj: dict) -> str:
    return _render_json(obj) + "\n"


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    return str(value)


def _csv_text(kind: str, params: dict, columns: list[str], rows) -> str:
    lines = [f"# schema=lvglass/{kind}/v{SCHEMA_VERSION}"]
    for key in sorted(params):
        lines.append(f"# {key}={_cell(params[key])}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(c) for c in row))
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


@lru_cache(maxsize=None)
def _schema(kind: str) -> dict:
    schema_path = Path(__file__).parent / "schemas" / f"{kind}.v{SCHEMA_VERSION}.json"
    return json.loads(schema_path.read_text())


def _write_json(path: Path, kind: str, obj: dict) -> Path:
    text = _json_text(obj)
    jsonschema.validate(json.loads(text), _schema(kind))
    return _atomic_write(path, text)


def _resolve_out(given: str | None, default_name: str) -> Path:
    if given:
        return Path(given)
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / default_name


# ---------------------------------------------------------------------------
# option plumbing

_REQUIRED = object()


@dataclass(frozen=True)
class Opt:
    name: str
    type: object
    default: object
    help: str


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text}") from exc


def _observables(text: str) -> tuple:
    names = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    bad = [n for n in names if n not in _OBSERVABLE_FNS]
    if bad or not names:
        known = ", ".join(sorted(_OBSERVABLE_FNS))
        raise argparse.ArgumentTypeError(
            f"unknown observable(s) {bad}; choose from: {known}"
        )
    if len(set(names)) != len(names):
        raise argparse.ArgumentTypeError("duplicate observable names")
    return names


def _parse_grid(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise CliError(f"grid must be start:stop:step, got {spec!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"grid must be numeric start:stop:step, got {spec!r}") from exc
    if step <= 0 or stop < start:
        raise CliError(f"grid needs step > 0 and stop >= start, got {spec!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _read_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value")
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def _merge_values(opts: list[Opt], ns: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags, with unknown keys rejected."""
    known = {o.name.replace("-", "_"): o for o in opts}
    values = {
        key: o.default for key, o in known.items() if o.default is not _REQUIRED
    }
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    config_path = given.get("config")
    if config_path:
        for key, raw in _read_config(config_path).items():
            dest = key.replace("-", "_")
            if dest == "config":
                raise CliError("config cannot be set from inside a config file")
            if dest not in known:
                raise CliError(f"unknown config key: {key}")
            try:
                values[dest] = known[dest].type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise CliError(f"config key {key}: {exc}") from exc
    values.update(given)
    missing = [
        "--" + o.name
        for o in opts
        if o.default is _REQUIRED and o.name.replace("-", "_") not in values
    ]
    if missing:
        raise CliError("missing required flag(s): " + ", ".join(missing))
    return values


_COMMON = [
    Opt("output", str, None, "output file path (default: subcommand name under $LVGLASS_OUT_DIR)"),
    Opt("config", str, None, "flat key=value file supplying flag defaults"),
]


# ---------------------------------------------------------------------------
# subcommand handlers


@dataclass
class Outcome:
    paths: list
    code: int = 0
    note: str | None = None


def _cmd_frontier(v: dict) -> Outcome:
    kappas = _parse_grid(v["kappa_grid"])
    bad = [k for k in kappas if not (0.0 < k < KAPPA_SUP)]
    if bad:
        raise CliError(
            f"kappa grid must stay inside (0, {KAPPA_SUP:.10g}); offending values: "
            + ", ".join(format(b, ".10g") for b in bad)
        )
    rows = []
    failures = []
    for kappa in kappas:
        try:
            pt = frontier_curve([kappa])[0]
        except NoRootError as exc:
            failures.append(f"kappa={kappa:.10g}: {exc}")
            continue
        rows.append((pt.kappa, pt.alpha, pt.c, pt.lambda_plus))
    for msg in failures:
        print(f"note: {msg}", file=sys.stderr)
    if not rows:
        return Outcome([], 3, "no frontier point could be bracketed on the grid")
    path = _resolve_out(v["output"], "frontier.csv")
    text = _csv_text(
        "frontier",
        {"kappa_grid": v["kappa_grid"]},
        ["kappa", "alpha", "c", "lambda_plus"],
        rows,
    )
    return Outcome([_atomic_write(path, text)])


def _lambda_sim_row(task: tuple) -> tuple:
    n, kappa, alpha, seed, restarts = task
    mat = InteractionMatrix.sample(n, EnsembleParams(kappa, alpha), seed)
    value = lambda_plus_max(mat.entries, restarts=restarts, seed=seed)
    return seed, value


def _cmd_lambda_sim(v: dict) -> Outcome:
    if v["draws"] < 1:
        raise CliError("--draws must be >= 1")
    if not (0.0 <= v["eps_sigma"] < 1.0):
        raise CliError(f"--eps-sigma must lie in [0, 1), got {v['eps_sigma']}")
    EnsembleParams(v["kappa"], v["alpha"])  # validates kappa > 0
    tasks = [
        (v["n"], v["kappa"], v["alpha"], v["seed"] + r, v["restarts"])
        for r in range(v["draws"])
    ]
    if v["jobs"] > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=v["jobs"]) as pool:
            results = list(pool.map(_lambda_sim_row, tasks))
    else:
        results = [_lambda_sim_row(t) for t in tasks]
    threshold = 1.0 - v["eps_sigma"]
    rows = [
        (v["n"], seed, v["kappa"], v["alpha"], value, int(value < threshold))
        for seed, value in results
    ]
    params = {
        k: v[k] for k in ("n", "draws", "kappa", "alpha", "seed", "eps_sigma", "restarts")
    }
    path = _resolve_out(v["output"], "lambda-sim.csv")
    text = _csv_text(
        "lambda-sim",
        params,
        ["n", "seed", "kappa", "alpha", "lambda_max_heuristic", "realizable_flag"],
        rows,
    )
    return Outcome([_atomic_write(path, text)])


def _logmean(x: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        return float(np.mean(np.log(x)))


_OBSERVABLE_FNS = {
    "mean": lambda x: float(np.mean(x)),
    "second-moment": lambda x: float(np.mean(x * x)),
    "logmean": _logmean,
}


def _draw_interaction(n: int, kappa: float, alpha: float, seed: int):
    if kappa > 0.0:
        return InteractionMatrix.sample(n, EnsembleParams(kappa, alpha), seed)
    return (alpha / n) * np.ones((n, n))


def _cmd_sde(v: dict) -> Outcome:
    if v["t_end"] <= 0.0:
        raise CliError(f"--t-end must be positive, got {v['t_end']}")
    if not (0.0 <= v["burn_in"] < v["t_end"]):
        raise CliError(f"--burn-in must lie in [0, t_end), got {v['burn_in']}")
    if v["x0_value"] < 0.0:
        raise CliError(f"--x0-value must be nonnegative, got {v['x0_value']}")
    if v["kappa"] < 0.0:
        raise CliError(f"--kappa must be nonnegative, got {v['kappa']}")
    names = v["observables"]
    sigma = _draw_interaction(v["n"], v["kappa"], v["alpha"], v["matrix_seed"])
    params = ModelParams(
        n=v["n"], sigma=sigma, phi=v["phi"], temperature=v["temperature"]
    )
    n_steps = int(round(v["t_end"] / v["dt"]))
    store_every = v["store_every"] or max(1, n_steps // 2000)
    traj = simulate(
        params,
        v["dt"],
        v["t_end"],
        x0=np.full(v["n"], v["x0_value"]),
        seed=v["seed"],
        store_every=store_every,
    )

    series = {
        name: [_OBSERVABLE_FNS[name](state) for state in traj.states] for name in names
    }
    rows = [
        (t, *(series[name][i] for name in names))
        for i, t in enumerate(traj.times)
    ]
    hdr = {
        k: v[k]
        for k in (
            "n", "kappa", "alpha", "phi", "temperature", "dt", "t_end",
            "seed", "matrix_seed", "burn_in", "x0_value",
        )
    }
    hdr["store_every"] = store_every
    hdr["observables"] = ",".join(names)
    csv_path = _resolve_out(v["output"], "sde.csv")
    csv_path = _atomic_write(
        csv_path, _csv_text("sde", hdr, ["time", *names], rows)
    )

    if traj.exploded:
        averages = {name: None for name in names}
    else:
        # logmean is averaged over each coordinate's positive times: the
        # truncation scheme's isolated zeros would otherwise yield -inf
        averages = {
            name: float(
                log_time_average(traj, burn_in=v["burn_in"])
                if name == "logmean"
                else time_average(traj, _OBSERVABLE_FNS[name], burn_in=v["burn_in"])
            )
            for name in names
        }
    summary = {
        "schema": f"lvglass/sde-summary/v{SCHEMA_VERSION}",
        "params": {
            "n": v["n"], "kappa": v["kappa"], "alpha": v["alpha"],
            "phi": v["phi"], "temperature": v["temperature"],
            "dt": v["dt"], "t_end": v["t_end"],
            "seed": v["seed"], "matrix_seed": v["matrix_seed"],
            "burn_in": v["burn_in"], "store_every": store_every,
        },
        "observables": list(names),
        "time_averages": averages,
        "exploded": bool(traj.exploded),
        "explosion_time": traj.explosion_time,
    }
    if v["summary"]:
        summary_path = Path(v["summary"])
    else:
        summary_path = csv_path.with_name(csv_path.stem + "-summary.json")
    summary_path = _write_json(summary_path, "sde-summary", summary)
    paths = [csv_path, summary_path]
    if traj.exploded:
        return Outcome(paths, 3, f"trajectory exploded at t={traj.explosion_time:g}")
    return Outcome(paths)


def _require_t_below_phi(v: dict) -> None:
    if v["temperature"] >= v["phi"]:
        raise CliError(
            "the invariant Gibbs measure requires T < phi; "
            f"got temperature={v['temperature']:g} >= phi={v['phi']:g}"
        )


def _cmd_gibbs_sample(v: dict) -> Outcome:
    _require_t_below_phi(v)
    if v["kappa"] < 0.0:
        raise CliError(f"--kappa must be nonnegative, got {v['kappa']}")
    if v["kappa"] > 0.0:
        limit = lambda_plus(EnsembleParams(v["kappa"], v["alpha"])).lambda_plus
    else:
        limit = max(v["alpha"], 0.0)
    if limit >= 1.0:
        raise CliError(
            f"ensemble outside the realizability frontier: lambda_plus={limit:.6g} >= 1"
        )
    eps = v["eps_sigma"]
    if eps is None:
        eps = 0.5 * (1.0 - limit)
    if not (0.0 < eps < 1.0):
        raise CliError(f"--eps-sigma must lie in (0, 1), got {eps}")

    mat = _draw_interaction(v["n"], v["kappa"], v["alpha"], v["matrix_seed"])
    entries = mat.entries if isinstance(mat, InteractionMatrix) else mat
    used = truncate_interaction(entries, eps, seed=v["matrix_seed"])
    truncated = not np.array_equal(used, entries)
    sigma = used if truncated else mat
    params = ModelParams(
        n=v["n"], sigma=sigma, phi=v["phi"], temperature=v["temperature"]
    )
    target = GibbsTarget(params)
    samples = mcmc_sample(
        target,
        v["chain_length"],
        v["seed"],
        n_chains=v["n_chains"],
        burn_in=v["burn_in"],
    )
    site_means = samples.samples.mean(axis=2)  # (chains, kept)
    value = float(site_means.mean())
    if v["n_chains"] >= 2:
        chain_means = site_means.mean(axis=1)
        se = float(np.std(chain_means, ddof=1) / math.sqrt(v["n_chains"]))
        r_hat = float(gelman_rubin(site_means))
    else:
        se = float(_batch_se(site_means[0]))
        r_hat = None
    se = max(se, 1e-15)

    obj = {
        "schema": f"lvglass/free-energy/v{SCHEMA_VERSION}",
        "mode": "single-draw",
        "observable": "site-mean",
        "n": v["n"],
        "kappa": v["kappa"],
        "alpha": v["alpha"],
        "beta": 1.0 / v["temperature"],
        "phi": v["phi"],
        "temperature": v["temperature"],
        "value": value,
        "std_error": se,
        "truncation_frequency": 1.0 if truncated else 0.0,
        "seeds": [v["matrix_seed"], v["seed"]],
        "schedule": [],
        "chain_length": v["chain_length"],
        "n_chains": v["n_chains"],
        "eps_sigma": eps,
        "acceptance_rates": [float(a) for a in samples.acceptance_rates],
        "r_hat": r_hat,
    }
    path = _write_json(
        _resolve_out(v["output"], "gibbs-sample.json"), "free-energy", obj
    )
    return Outcome([path])


def _cmd_free_energy(v: dict) -> Outcome:
    _require_t_below_phi(v)
    ensemble = EnsembleParams(v["kappa"], v["alpha"])
    params = ModelParams(
        n=v["n"], sigma=None, phi=v["phi"], temperature=v["temperature"]
    )
    if v["t_points"] < 2:
        raise CliError(f"--t-points must be >= 2, got {v['t_points']}")
    est = free_energy_disorder_avg(
        v["n"],
        ensemble,
        params,
        v["replicas"],
        v["eps_sigma"],
        seed=v["seed"],
        jobs=v["jobs"],
        chain_length=v["chain_length"],
        n_chains=v["n_chains"],
        t_grid=np.linspace(0.0, 1.0, v["t_points"]),
    )
    obj = {
        "schema": f"lvglass/free-energy/v{SCHEMA_VERSION}",
        "mode": "disorder-average",
        "n": est.n,
        "kappa": v["kappa"],
        "alpha": v["alpha"],
        "beta": 1.0 / v["temperature"],
        "phi": v["phi"],
        "temperature": v["temperature"],
        "value": est.value,
        "std_error": est.std_error,
        "truncation_frequency": est.truncation_frequency,
        "seeds": list(est.seeds),
        "schedule": list(est.schedule),
        "replicas": est.replicas,
        "chain_length": v["chain_length"],
        "n_chains": v["n_chains"],
    }
    path = _write_json(
        _resolve_out(v["output"], "free-energy.json"), "free-energy", obj
    )
    return Outcome([path])


_ARG_KEYS = ("beta", "phi", "kappa", "alpha", "a", "h", "gamma", "lambdas", "atoms")


def _functional_inputs(spec: dict) -> tuple[MeanFieldModel, ParisiMeasure, ParisiArgs]:
    missing = [k for k in _ARG_KEYS if k not in spec]
    if missing:
        raise CliError("argument file missing key(s): " + ", ".join(missing))
    model = MeanFieldModel(
        beta=float(spec["beta"]), kappa=float(spec["kappa"]),
        alpha=float(spec["alpha"]), phi=float(spec["phi"]),
    )
    zeta = ParisiMeasure(
        tuple(float(x) for x in spec["lambdas"]),
        tuple(float(x) for x in spec["atoms"]),
    )
    args = ParisiArgs(
        a=float(spec["a"]), h=float(spec["h"]), gamma=float(spec["gamma"]), model=model
    )
    return model, zeta, args


def _cmd_parisi_eval(v: dict) -> Outcome:
    try:
        spec = json.loads(Path(v["args"]).read_text())
    except OSError as exc:
        raise CliError(f"cannot read argument file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"argument file is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise CliError("argument file must hold a JSON object")
    model, zeta, args = _functional_inputs(spec)
    n_hermite = int(spec.get("n_hermite", v["n_hermite"]))
    x0 = recursion_x0(zeta, args, n_hermite=n_hermite, check=bool(v["check"]))
    d = zeta.atoms[-1]
    # objective re-runs the recursion, keeping its two-form self-check live
    value = objective(zeta, args, d, n_hermite=n_hermite)
    correction = quadratic_correction(zeta, model.covariance)
    gamma_term = args.gamma * d
    field_term = 0.5 * model.beta * model.alpha * args.h**2
    obj = {
        "schema": f"lvglass/parisi-eval/v{SCHEMA_VERSION}",
        "arguments": {
            "beta": model.beta, "phi": model.phi,
            "kappa": model.kappa, "alpha": model.alpha,
            "a": args.a, "h": args.h, "gamma": args.gamma,
            "lambdas": list(zeta.lambdas), "atoms": list(zeta.atoms),
        },
        "x0": x0,
        "quadratic_correction": correction,
        "gamma_term": gamma_term,
        "field_term": field_term,
        "value": value,
        "n_hermite": n_hermite,
    }
    path = _write_json(
        _resolve_out(v["output"], "parisi-eval.json"), "parisi-eval", obj
    )
    return Outcome([path])


def _cmd_parisi_opt(v: dict) -> Outcome:
    model = MeanFieldModel(
        beta=v["beta"], kappa=v["kappa"], alpha=v["alpha"], phi=v["phi"]
    )
    res = saddle_search(
        model,
        k_levels=v["levels"],
        n_hermite=v["n_hermite"],
        outer_maxfev=v["outer_maxfev"],
        residual_tol=v["residual_tol"],
    )
    obj = {
        "schema": f"lvglass/parisi-opt/v{SCHEMA_VERSION}",
        "model": {
            "beta": model.beta, "phi": model.phi,
            "kappa": model.kappa, "alpha": model.alpha,
        },
        "levels": res.levels,
        "value": res.value,
        "arguments": {
            "a": res.a, "d": res.d, "h": res.h, "gamma": res.gamma,
            "lambdas": list(res.zeta.lambdas), "atoms": list(res.zeta.atoms),
        },
        "residuals": {k: float(val) for k, val in res.residuals.items()},
        "converged": res.converged,
        "outer_evaluations": res.outer_evaluations,
        "n_hermite": v["n_hermite"],
    }
    path = _write_json(_resolve_out(v["output"], "parisi-opt.json"), "parisi-opt", obj)
    if not res.converged:
        worst = max(abs(x) for x in obj["residuals"].values())
        return Outcome(
            [path], 3, f"saddle search missed the residual tolerance (worst {worst:.3g})"
        )
    return Outcome([path])


def _cmd_rpc_verify(v: dict) -> Outcome:
    model = MeanFieldModel(
        beta=v["beta"], kappa=v["kappa"], alpha=v["alpha"], phi=v["phi"]
    )
    zeta = ParisiMeasure(v["lambdas"], v["atoms"])
    args = ParisiArgs(a=v["a"], h=v["h"], gamma=v["gamma"], model=model)
    report = verify_prpc(zeta, args, v["n_branch"], v["replicas"], seed=v["seed"])
    obj = {
        "schema": f"lvglass/rpc-verify/v{SCHEMA_VERSION}",
        "arguments": {
            "beta": model.beta, "phi": model.phi,
            "kappa": model.kappa, "alpha": model.alpha,
            "a": args.a, "h": args.h, "gamma": args.gamma,
            "lambdas": list(zeta.lambdas), "atoms": list(zeta.atoms),
        },
        "mc_estimate": report.mc_estimate,
        "recursion_value": report.recursion_value,
        "std_error": report.std_error,
        "z_score": report.z_score,
        "N": report.n_branch,
        "replicas": report.replicas,
        "seed": report.seed,
        "mean_retained_mass": report.mean_retained_mass,
    }
    path = _write_json(_resolve_out(v["output"], "rpc-verify.json"), "rpc-verify", obj)
    return Outcome([path])


# ---------------------------------------------------------------------------
# parser assembly

_COMMANDS: dict = {
    "frontier": (
        "realizability frontier on a kappa grid (CSV)",
        _cmd_frontier,
        [
            Opt("kappa-grid", str, _REQUIRED, "inclusive grid start:stop:step"),
            *_COMMON,
        ],
    ),
    "lambda-sim": (
        "heuristic spectral bound over random draws (CSV)",
        _cmd_lambda_sim,
        [
            Opt("n", int, _REQUIRED, "system size"),
            Opt("draws", int, _REQUIRED, "number of interaction draws"),
            Opt("kappa", float, _REQUIRED, "disorder strength"),
            Opt("alpha", float, _REQUIRED, "mean interaction"),
            Opt("seed", int, 0, "base seed; draw r uses seed + r"),
            Opt("eps-sigma", float, 0.0, "realizability margin for the flag column"),
            Opt("restarts", int, 8, "heuristic ascent restarts per draw"),
            Opt("jobs", int, 1, "parallel workers over draws"),
            *_COMMON,
        ],
    ),
    "sde": (
        "trajectory time series (CSV) and time averages (JSON)",
        _cmd_sde,
        [
            Opt("n", int, _REQUIRED, "system size"),
            Opt("kappa", float, _REQUIRED, "disorder strength (0 allowed)"),
            Opt("alpha", float, _REQUIRED, "mean interaction"),
            Opt("phi", float, _REQUIRED, "immigration rate"),
            Opt("temperature", float, _REQUIRED, "noise temperature"),
            Opt("dt", float, _REQUIRED, "Euler step size"),
            Opt("t-end", float, _REQUIRED, "integration horizon"),
            Opt("seed", int, 0, "driving-noise seed"),
            Opt("matrix-seed", int, 0, "interaction draw seed"),
            Opt("observables", _observables, ("mean", "second-moment", "logmean"),
                "comma list: mean, second-moment, logmean"),
            Opt("burn-in", float, 0.0, "time discarded before averaging"),
            Opt("store-every", int, 0, "store every k-th step (0: auto, about 2000 rows)"),
            Opt("x0-value", float, 1.0, "uniform initial coordinate value"),
            Opt("summary", str, None, "summary JSON path (default: alongside the CSV)"),
            *_COMMON,
        ],
    ),
    "gibbs-sample": (
        "Metropolis site-mean estimate under one draw (JSON)",
        _cmd_gibbs_sample,
        [
            Opt("n", int, _REQUIRED, "system size"),
            Opt("kappa", float, _REQUIRED, "disorder strength (0 allowed)"),
            Opt("alpha", float, _REQUIRED, "mean interaction"),
            Opt("phi", float, _REQUIRED, "immigration rate"),
            Opt("temperature", float, _REQUIRED, "temperature (must stay below phi)"),
            Opt("chain-length", int, 4000, "kept Metropolis steps per chain"),
            Opt("n-chains", int, 2, "independent chains"),
            Opt("burn-in", int, None, "discarded steps (default: chain length / 5)"),
            Opt("seed", int, 0, "chain seed"),
            Opt("matrix-seed", int, 0, "interaction draw seed"),
            Opt("eps-sigma", float, None,
                "truncation margin (default: half the frontier gap)"),
            *_COMMON,
        ],
    ),
    "free-energy": (
        "disorder-averaged per-site log partition function (JSON)",
        _cmd_free_energy,
        [
            Opt("n", int, _REQUIRED, "system size"),
            Opt("kappa", float, _REQUIRED, "disorder strength"),
            Opt("alpha", float, _REQUIRED, "mean interaction"),
            Opt("phi", float, _REQUIRED, "immigration rate"),
            Opt("temperature", float, _REQUIRED, "temperature (must stay below phi)"),
            Opt("replicas", int, _REQUIRED, "disorder draws to average"),
            Opt("seed", int, 0, "base seed; replica r draws with seed + r"),
            Opt("jobs", int, 1, "parallel workers over replicas"),
            Opt("chain-length", int, 4000, "kept Metropolis steps per coupling node"),
            Opt("n-chains", int, 2, "chains per coupling node"),
            Opt("t-points", int, 21, "coupling schedule nodes on [0, 1]"),
            Opt("eps-sigma", float, None,
                "truncation margin (default: half the frontier gap)"),
            *_COMMON,
        ],
    ),
    "parisi-eval": (
        "evaluate the variational functional from a JSON argument file",
        _cmd_parisi_eval,
        [
            Opt("args", str, _REQUIRED, "JSON file with beta, phi, kappa, alpha, a, h, gamma, lambdas, atoms"),
            Opt("n-hermite", int, 40, "Gauss-Hermite order per level"),
            Opt("check", int, 1, "1: verify by doubling quadrature orders, 0: skip"),
            *_COMMON,
        ],
    ),
    "parisi-opt": (
        "saddle-point search over the variational family (JSON)",
        _cmd_parisi_opt,
        [
            Opt("beta", float, _REQUIRED, "inverse temperature"),
            Opt("phi", float, _REQUIRED, "immigration rate"),
            Opt("kappa", float, _REQUIRED, "disorder strength (0 allowed)"),
            Opt("alpha", float, _REQUIRED, "mean interaction"),
            Opt("levels", int, 1, "number of cascade levels"),
            Opt("n-hermite", int, 40, "Gauss-Hermite order per level"),
            Opt("outer-maxfev", int, 250, "outer simplex evaluation budget"),
            Opt("residual-tol", float, 1e-4, "stationarity residual certifying convergence"),
            *_COMMON,
        ],
    ),
    "rpc-verify": (
        "cascade Monte-Carlo check of the recursion value (JSON)",
        _cmd_rpc_verify,
        [
            Opt("beta", float, _REQUIRED, "inverse temperature"),
            Opt("phi", float, _REQUIRED, "immigration rate"),
            Opt("kappa", float, _REQUIRED, "disorder strength"),
            Opt("alpha", float, _REQUIRED, "mean interaction"),
            Opt("a", float, _REQUIRED, "leaf integral upper limit"),
            Opt("h", float, 0.0, "external field argument"),
            Opt("gamma", float, _REQUIRED, "quadratic tilt argument"),
            Opt("lambdas", _float_list, _REQUIRED, "comma list of cascade exponents"),
            Opt("atoms", _float_list, _REQUIRED, "comma list of overlap atoms, starting at 0"),
            Opt("n-branch", int, _REQUIRED, "branching factor per cascade level"),
            Opt("replicas", int, _REQUIRED, "independent cascade replicas"),
            Opt("seed", int, 0, "base seed; replica r uses seed + r"),
            *_COMMON,
        ],
    ),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvglass",
        description="random Lotka-Volterra interaction, Gibbs, and free-energy tools",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"lvglass {__version__} (schema v{SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name, (help_text, _, opts) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        for opt in opts:
            sp.add_argument(
                "--" + opt.name,
                dest=opt.name.replace("-", "_"),
                type=opt.type,
                default=argparse.SUPPRESS,
                help=opt.help,
            )
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return exc.code if isinstance(exc.code, int) else 2
    _, handler, opts = _COMMANDS[ns.command]
    try:
        values = _merge_values(opts, ns)
        outcome = handler(values)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for path in outcome.paths:
        print(f"wrote {path}")
    if outcome.note:
        print(f"note: {outcome.note}", file=sys.stderr)
    return outcome.code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
