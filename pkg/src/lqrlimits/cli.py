"""Command-line front end.

    lqr-limits <command> --config <path> [--out <path>] [--seed <u64>]

Commands: bound, figure1, scan, compare, simulate, verify. Configuration is
a single JSON file with a ``schema_version`` field; no environment
variables. Output CSVs are comma-separated with a header row, LF line
endings and shortest round-trip float formatting. Every command is
deterministic given its config: same config and seed, byte-identical files.

Exit codes: 0 success, 1 error, 2 flagged-but-computed (a burn-in condition
failed; any report produced is still written).
"""

import argparse
import json
import math
import sys as _sys

import numpy as np

from . import bounds, perturb, simulate, verify
from .bounds import ExplorationSetup, GammaChoice
from .errors import ConfigError, LqrLimitsError
from .lti import SystemInstance

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2


def _fmt(x):
    """Shortest round-trip decimal form of a value for CSV cells."""
    if isinstance(x, float) or isinstance(x, np.floating):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _field(obj, key, path, required=True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(f"missing field '{path}.{key}'")
        return default
    return obj[key]


def _number(obj, key, path, required=True, default=None):
    val = _field(obj, key, path, required, default)
    if val is None:
        return None
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"field '{path}.{key}' must be a number")
    return val


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}, col {exc.colno})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    version = _field(cfg, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"field 'schema_version' must be {SCHEMA_VERSION}, got {version!r}")
    return cfg


def build_system(cfg):
    spec = _field(cfg, "system", "")
    if not isinstance(spec, dict):
        raise ConfigError("field 'system' must be an object")
    kind = _field(spec, "kind", "system")
    if kind == "scalar":
        a = _number(spec, "a", "system")
        b = _number(spec, "b", "system")
        q = _number(spec, "q", "system", required=False, default=1.0)
        r = _number(spec, "r", "system", required=False, default=1.0)
        sw = _number(spec, "sigma_w_sq", "system", required=False, default=1.0)
        return SystemInstance(A=[[a]], B=[[b]], Q=[[q]], R=[[r]], Sigma_W=[[sw]])
    if kind == "scalar_gamma":
        gamma = _number(spec, "gamma", "system")
        if not 0.0 < gamma < 1.0:
            raise ConfigError("field 'system.gamma' must lie in (0, 1)")
        return bounds.scalar_instance(gamma)
    if kind == "exponential":
        d_x = _number(spec, "d_x", "system")
        rho = _number(spec, "rho", "system")
        if int(d_x) != d_x or d_x < 2:
            raise ConfigError("field 'system.d_x' must be an integer >= 2")
        if not 0.0 < rho < 1.0:
            raise ConfigError("field 'system.rho' must lie in (0, 1)")
        return bounds.exponential_instance(int(d_x), rho)
    if kind == "explicit":
        try:
            return SystemInstance.from_json_dict(spec)
        except ValueError as exc:
            raise ConfigError(f"field 'system': {exc}") from exc
    raise ConfigError(
        f"field 'system.kind' must be one of scalar, scalar_gamma, exponential, explicit; got {kind!r}"
    )


def build_setup(cfg, system):
    spec = _field(cfg, "setup", "")
    if not isinstance(spec, dict):
        raise ConfigError("field 'setup' must be an object")
    F = _field(spec, "F", "setup", required=False, default=0)
    if F == 0:
        F = np.zeros((system.d_u, system.d_x))
    else:
        F = np.array(F, dtype=float)
    sigma = _number(spec, "sigma_u_sq", "setup")
    N = _number(spec, "N", "setup")
    T = _number(spec, "T", "setup")
    if int(N) != N or N < 1 or int(T) != T or T < 1:
        raise ConfigError("fields 'setup.N' and 'setup.T' must be positive integers")
    try:
        setup = ExplorationSetup(F=F, sigma_u_sq=sigma, N=int(N), T=int(T))
        setup.validate_for(system)
    except (ValueError, LqrLimitsError) as exc:
        raise ConfigError(f"field 'setup': {exc}") from exc
    return setup


def build_basis(cfg, system):
    spec = _field(cfg, "basis", "", required=False, default="canonical")
    if isinstance(spec, dict):
        path = _field(spec, "file", "basis")
        try:
            with open(path) as fh:
                items = json.load(fh)
            return perturb.PerturbationBasis.from_json_list(items)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ConfigError(f"field 'basis.file': cannot load basis: {exc}") from exc
    if spec == "input":
        return perturb.PerturbationBasis(directions=(perturb.input_direction(system),))
    if spec == "self":
        return perturb.PerturbationBasis(directions=(perturb.self_direction(system),))
    if spec == "polderman":
        from .lti import lqr_synthesize

        return perturb.polderman_basis(lqr_synthesize(system))
    if spec == "canonical":
        return perturb.canonical_basis(system.d_x, system.d_u)
    raise ConfigError(
        f"field 'basis' must be input, self, polderman, canonical or {{'file': path}}; got {spec!r}"
    )


def build_gamma_choice(cfg):
    raw = _field(cfg, "gamma_choice", "", required=False, default="noise_floor")
    try:
        return GammaChoice(raw)
    except ValueError as exc:
        raise ConfigError(
            f"field 'gamma_choice' must be noise_floor or stationary_half, got {raw!r}"
        ) from exc


def _resolve_out(args, cfg, default_name):
    if args.out:
        return args.out
    if "out" in cfg:
        return cfg["out"]
    return default_name


def _resolve_seed(args, cfg):
    if args.seed is not None:
        return args.seed
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("field 'seed' must be a nonnegative integer")
    return seed


def cmd_bound(args):
    cfg = load_config(args.config)
    system = build_system(cfg)
    setup = build_setup(cfg, system)
    gamma_choice = build_gamma_choice(cfg)
    seed = _resolve_seed(args, cfg)
    bound_spec = _field(cfg, "bound", "", required=False, default={"form": "asymptotic"})
    form = _field(bound_spec, "form", "bound")
    if form == "asymptotic":
        basis = build_basis(cfg, system)
        report = bounds.asymptotic_lower_bound(system, setup, basis, gamma_choice)
    elif form == "finite_sample":
        basis = build_basis(cfg, system)
        epsilon = _number(bound_spec, "epsilon", "bound")
        ball_samples = int(
            _number(bound_spec, "ball_samples", "bound", required=False, default=64)
        )
        j_norm = _number(bound_spec, "j_lambda_norm", "bound", required=False)
        if j_norm is None:
            prior_c = _number(bound_spec, "prior_constant", "bound", required=False)
            if prior_c is None:
                raise ConfigError(
                    "field 'bound' needs either 'j_lambda_norm' or 'prior_constant'"
                )
            j_norm = bounds.prior_fisher_norm(prior_c, epsilon)
        report = bounds.finite_sample_bound(
            system, setup, basis, epsilon, j_norm, gamma_choice,
            ball_samples=ball_samples, seed=seed,
        )
    elif form == "dimensional":
        report = bounds.dimensional_bound(system, setup)
    elif form == "exponential":
        spec = _field(cfg, "system", "")
        if _field(spec, "kind", "system") != "exponential":
            raise ConfigError("bound form 'exponential' requires system.kind = exponential")
        report = bounds.exponential_bound(
            int(_number(spec, "d_x", "system")), _number(spec, "rho", "system"), setup
        )
    elif form == "system_theoretic":
        report = bounds.system_theoretic_bound(system, setup)
    else:
        raise ConfigError(f"field 'bound.form' unknown: {form!r}")
    out = _resolve_out(args, cfg, "bound_report.json")
    _write_json(out, report.to_json_dict())
    print(f"wrote {out}")
    return EXIT_OK if report.burn_in_ok else EXIT_FLAGGED


def cmd_figure1(args):
    cfg = load_config(args.config)
    spec = _field(cfg, "figure1", "", required=False, default={})
    gamma_min = _number(spec, "gamma_min", "figure1", required=False, default=1e-3)
    gamma_max = _number(spec, "gamma_max", "figure1", required=False, default=1e-2)
    n_points = int(_number(spec, "n_points", "figure1", required=False, default=50))
    if not (0.0 < gamma_min <= gamma_max < 1.0):
        raise ConfigError("figure1 range must satisfy 0 < gamma_min <= gamma_max < 1")
    if n_points < 1:
        raise ConfigError("field 'figure1.n_points' must be >= 1")
    setup_cfg = _field(cfg, "setup", "", required=False, default={})
    T = int(_number(setup_cfg, "T", "setup", required=False, default=10))
    N = int(_number(setup_cfg, "N", "setup", required=False, default=1))
    setup = ExplorationSetup(F=np.zeros((1, 1)), sigma_u_sq=1.0, N=N, T=T)
    if n_points == 1:
        gammas = np.array([gamma_min])
    else:
        gammas = np.logspace(math.log10(gamma_min), math.log10(gamma_max), n_points)
    points = bounds.scalar_bound_curve(gammas, setup)
    rows = [(p.gamma, p.bound_value, p.P, p.K, p.dK_db) for p in points]
    out = _resolve_out(args, cfg, "figure1.csv")
    _write_csv(out, ("gamma", "bound_value", "P", "K", "dK_db"), rows)
    print(f"wrote {out}")
    return EXIT_OK


def _fit_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    return float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))


def cmd_scan(args):
    cfg = load_config(args.config)
    spec = _field(cfg, "scan", "")
    kind = _field(spec, "kind", "scan")
    seed = _resolve_seed(args, cfg)
    setup_cfg = _field(cfg, "setup", "", required=False, default={})
    T = int(_number(setup_cfg, "T", "setup", required=False, default=10))
    sigma = _number(setup_cfg, "sigma_u_sq", "setup", required=False, default=1.0)
    out = _resolve_out(args, cfg, "scan.csv")

    if kind == "exponential":
        d_x_values = _field(spec, "d_x_values", "scan", required=False, default=[3, 4, 5, 6, 7, 8])
        rho = _number(spec, "rho", "scan", required=False, default=0.5)
        rows = []
        for d_x in d_x_values:
            setup = ExplorationSetup(F=np.zeros((1, int(d_x))), sigma_u_sq=sigma, N=1, T=T)
            rep = bounds.exponential_bound(int(d_x), rho, setup)
            exact = rep.extras["exact_bound_value"]
            rows.append(
                (
                    int(d_x),
                    rho,
                    rep.bound_value,
                    exact,
                    math.log(rep.bound_value, 4.0),
                    math.log(exact, 4.0),
                )
            )
        header = ("d_x", "rho", "closed_form", "exact_bound", "log4_closed", "log4_exact")
        _write_csv(out, header, rows)
        slope_closed = _fit_slope([r[0] for r in rows], [r[4] for r in rows])
        slope_exact = _fit_slope([r[0] for r in rows], [r[5] for r in rows])
        print(f"wrote {out}")
        print(f"fitted_slope_closed={_fmt(slope_closed)}")
        print(f"fitted_slope_exact={_fmt(slope_exact)}")
        return EXIT_OK

    if kind == "dimension":
        dims = _field(spec, "dims", "scan", required=False,
                      default=[[2, 1], [2, 2], [3, 1], [3, 2], [4, 2], [4, 4]])
        per_dim = int(_number(spec, "instances_per_dim", "scan", required=False, default=3))
        rho = _number(spec, "rho", "scan", required=False, default=0.7)
        rows = []
        for d_x, d_u in dims:
            for i in range(per_dim):
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=seed, spawn_key=(d_x, d_u, i))
                )
                system = verify.random_stable_instance(rng, int(d_x), int(d_u), rho=rho)
                from .lti import lqr_synthesize

                sol = lqr_synthesize(system)
                setup = verify.burned_in_setup(sol, int(d_x), int(d_u), sigma_u_sq=sigma)
                rep = bounds.dimensional_bound(system, setup)
                rows.append((int(d_x), int(d_u), int(d_x) * int(d_u), i, rep.bound_value,
                             rep.extras.get("exact_bound_value")))
        header = ("d_x", "d_u", "dx_du", "instance", "closed_form", "exact_bound")
        _write_csv(out, header, rows)
        print(f"wrote {out}")
        return EXIT_OK

    raise ConfigError(f"field 'scan.kind' must be dimension or exponential, got {kind!r}")


def cmd_compare(args):
    cfg = load_config(args.config)
    system = build_system(cfg)
    gamma_choice = build_gamma_choice(cfg)
    basis = build_basis(cfg, system)
    seed = _resolve_seed(args, cfg)
    spec = _field(cfg, "compare", "")
    N_list = _field(spec, "N_list", "compare")
    trials = int(_number(spec, "trials", "compare"))
    if trials < 30:
        raise ConfigError("field 'compare.trials' must be >= 30")
    diagnostic = bool(_field(spec, "diagnostic_exact_model", "compare", required=False, default=False))
    setup_cfg = _field(cfg, "setup", "")
    rows = []
    stats_json = []
    flagged = False
    violation = None
    for N in N_list:
        cfg_n = dict(setup_cfg)
        cfg_n["N"] = N
        setup = build_setup({"setup": cfg_n}, system)
        rep = bounds.asymptotic_lower_bound(system, setup, basis, gamma_choice)
        if rep.bound_value is None:
            raise LqrLimitsError("asymptotic bound withheld (burn-in failed); cannot compare")
        stats = simulate.monte_carlo_excess_cost(
            system, setup, trials=trials, seed=seed, exact_model=diagnostic
        )
        n_mean = stats.N_times_mean
        stderr_scaled = stats.N * stats.stderr
        ratio = n_mean / rep.bound_value if rep.bound_value > 0 else 0.0
        rows.append((stats.N, n_mean, stderr_scaled, rep.bound_value, ratio))
        entry = stats.to_json_dict()
        entry["bound_value"] = rep.bound_value
        entry["ratio"] = ratio
        if diagnostic:
            entry["diagnostic_exact_model"] = True
        stats_json.append(entry)
        if not diagnostic and ratio < 1.0 - 3.0 * stderr_scaled / rep.bound_value:
            violation = (stats.N, ratio)
    out = _resolve_out(args, cfg, "compare.csv")
    _write_csv(out, ("N", "n_mean", "stderr", "bound", "ratio"), rows)
    json_out = out[: -len(".csv")] + ".json" if out.endswith(".csv") else out + ".json"
    _write_json(json_out, {"rows": stats_json, "seed": seed, "diagnostic": diagnostic})
    print(f"wrote {out} and {json_out}")
    if diagnostic:
        print("diagnostic exact-model mode: ratios are not bound checks")
        flagged = True
    if violation is not None:
        raise LqrLimitsError(
            f"lower-bound violation at N={violation[0]}: ratio {violation[1]:.4g} "
            "below 1 - 3 SE/bound"
        )
    return EXIT_FLAGGED if flagged else EXIT_OK


def cmd_simulate(args):
    cfg = load_config(args.config)
    system = build_system(cfg)
    setup = build_setup(cfg, system)
    seed = _resolve_seed(args, cfg)
    trials = cfg.get("trials", 100)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("field 'trials' must be a positive integer")
    stats = simulate.monte_carlo_excess_cost(system, setup, trials=trials, seed=seed)
    out = _resolve_out(args, cfg, "simulation.json")
    _write_json(out, stats.to_json_dict())
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args):
    seed = args.seed if args.seed is not None else 0
    results = verify.run_all(seed=seed)
    n_failed = 0
    for res in results:
        marker = "PASS" if res.passed else "FAIL"
        print(f"[{marker}] {res.name}: {res.detail}")
        if not res.passed:
            n_failed += 1
    print(f"{len(results) - n_failed}/{len(results)} checks passed")
    return EXIT_OK if n_failed == 0 else EXIT_ERROR


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lqr-limits",
        description="Lower bounds on the excess cost of offline LQR learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("bound", cmd_bound, True),
        ("figure1", cmd_figure1, True),
        ("scan", cmd_scan, True),
        ("compare", cmd_compare, True),
        ("simulate", cmd_simulate, True),
        ("verify", cmd_verify, False),
    ):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except LqrLimitsError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
