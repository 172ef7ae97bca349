"""Command-line interface.

Subcommands: ``simulate``, ``fit-factors``, ``train``, ``forecast``,
``evaluate``, ``bench``, ``rate-diag``.  Every run echoes its fully
resolved configuration into the emitted report.  Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.

Flags may also be supplied through ``--config FILE`` holding ``key = value``
lines (same names as the long flags, dashes allowed); explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__, harness, io, simgen, tcn
from .errors import ConfigError, DataError, FactorcastError
from .factor_model import itipup_fit, rate_trend_diagnostic, select_ranks, extract_factors


def _int_tuple(text: str) -> tuple:
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _subparser_for(parser: argparse.ArgumentParser, command: str):
    for action in parser._actions:  # noqa: SLF001 - argparse offers no public route
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser):
    """Fill unset args from the key-value config file, if one was given.

    Coercion follows the flag's declared type; explicit command-line flags
    always win over file values.
    """
    if not getattr(args, "config", None):
        return
    sub = _subparser_for(parser, args.command)
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    values = io.read_config_file(args.config)
    for key, raw in values.items():
        dest = key.replace("-", "_")
        if dest not in actions or not hasattr(args, dest):
            raise ConfigError(f"unknown config key {key!r} in {args.config}")
        if dest in args.explicit:
            continue
        action = actions[dest]
        try:
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                value = action.type(raw)
            else:
                value = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in {args.config}: {exc}") from exc
        setattr(args, dest, value)


class _TrackingParser(argparse.ArgumentParser):
    """Remembers which destinations were set explicitly on the command line."""

    def parse_args(self, argv=None, namespace=None):
        args = super().parse_args(argv, namespace)
        explicit = set()
        raw = list(argv if argv is not None else sys.argv[1:])
        for token in raw:
            if token.startswith("--"):
                explicit.add(token[2:].split("=", 1)[0].replace("-", "_"))
        args.explicit = explicit
        return args


def _sim_config_from_args(args) -> simgen.SimConfig:
    overrides = {}
    for name in ("rho", "lam", "sigma_w", "sigma_e", "burn_in", "cp_rank"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.preset is not None:
        builder = {1: simgen.config1, 2: simgen.config2, 3: simgen.config3}[args.preset]
        if args.n is not None:
            overrides["n"] = args.n
        if args.sigma_u2 is not None:
            overrides["sigma_u2"] = args.sigma_u2
        if args.transform is not None:
            overrides["transform"] = args.transform
        cfg = builder(seed=args.seed, **overrides)
        return cfg
    for name, flag in (("dims", "--dims"), ("ranks", "--ranks"),
                       ("response_dims", "--response-dims"), ("n", "--n")):
        if getattr(args, name) is None:
            raise ConfigError(f"{flag} is required unless --preset is given")
    return simgen.SimConfig(
        dims=_int_tuple(args.dims),
        ranks=_int_tuple(args.ranks),
        response_dims=_int_tuple(args.response_dims),
        n=args.n,
        transform=args.transform or "softplus",
        sigma_u2=args.sigma_u2 if args.sigma_u2 is not None else 0.5,
        seed=args.seed,
        **overrides,
    )


def _echo_sim_config(cfg: simgen.SimConfig) -> dict:
    return {
        "dims": cfg.dims,
        "ranks": cfg.ranks,
        "response_dims": cfg.response_dims,
        "n": cfg.n,
        "transform": cfg.transform,
        "sigma_u2": cfg.sigma_u2,
        "cp_rank": cfg.cp_rank,
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "rho": cfg.rho,
        "lam": cfg.resolved_lam,
        "sigma_w": cfg.sigma_w,
        "sigma_e": cfg.sigma_e,
    }


def _emit(args, fields: dict):
    text = io.format_report(fields)
    sys.stdout.write(text)
    if getattr(args, "report", None):
        io.write_report(args.report, fields)


def _cmd_simulate(args) -> int:
    cfg = _sim_config_from_args(args)
    data = simgen.generate(cfg)
    io.write_series(args.out, data.covariates, data.responses)
    fields = {"command": "simulate", "out": args.out}
    fields.update({f"config.{k}": v for k, v in _echo_sim_config(cfg).items()})
    _emit(args, fields)
    return 0


def _tcn_overrides_from_args(args) -> dict:
    overrides = {
        "channels": _int_tuple(args.channels),
        "kernel_size": args.kernel_size,
        "dilations": _int_tuple(args.dilations),
        "activation": args.activation,
        "dropout_rate": args.dropout,
        "learning_rate": args.lr,
        "epochs": args.epochs,
        "seed": args.tcn_seed,
        "use_lagged_response": args.lagged,
    }
    if args.batch_len is not None:
        overrides["batch_len"] = args.batch_len
    if args.patience is not None:
        overrides["patience"] = args.patience if args.patience > 0 else None
    return overrides


def _add_tcn_flags(sub, epochs=2000, lr=3e-3, patience=None):
    sub.add_argument("--channels", default="16,16,16", help="channels per residual block")
    sub.add_argument("--kernel-size", type=int, default=3)
    sub.add_argument("--dilations", default="1,2,4", help="dilation per residual block")
    sub.add_argument("--activation", choices=("relu", "linear"), default="relu")
    sub.add_argument("--dropout", type=float, default=0.0)
    sub.add_argument("--lr", type=float, default=lr)
    sub.add_argument("--epochs", type=int, default=epochs)
    sub.add_argument("--batch-len", type=int, default=None)
    sub.add_argument("--patience", type=int, default=patience,
                     help="early-stop patience; 0 disables early stopping")
    sub.add_argument("--tcn-seed", type=int, default=0)
    sub.add_argument("--lagged", action="store_true",
                     help="feed lag-1 responses as extra inputs")


def _cmd_fit_factors(args) -> int:
    covariates, _ = io.read_series(args.data)
    t0 = time.perf_counter()
    if args.ranks is not None:
        ranks = _int_tuple(args.ranks)
    else:
        dims = covariates.shape[1:]
        caps = _int_tuple(args.r_max) if args.r_max else tuple(max(1, d - 1) for d in dims)
        ranks = select_ranks(covariates, caps)
    fit = itipup_fit(covariates, ranks, eps=args.eps, max_iter=args.max_iter)
    seconds = time.perf_counter() - t0
    io.write_loadings(args.out, fit)
    _emit(args, {
        "command": "fit-factors",
        "data": args.data,
        "out": args.out,
        "ranks": fit.loadings.ranks,
        "iterations_used": fit.iterations_used,
        "final_subspace_change": fit.final_subspace_change,
        "seconds.factorize": seconds,
        "config.eps": args.eps,
        "config.max_iter": args.max_iter,
    })
    return 0


def _cmd_train(args) -> int:
    covariates, responses = io.read_series(args.data)
    if responses is None:
        raise DataError(f"{args.data} has no response block; cannot train")
    loadings, _, _ = io.read_loadings(args.loadings)
    factors = extract_factors(covariates, loadings)
    overrides = _tcn_overrides_from_args(args)
    overrides["input_width"] = int(np.prod(loadings.ranks)) + (
        int(np.prod(responses.shape[1:])) if args.lagged else 0
    )
    overrides["output_width"] = int(np.prod(responses.shape[1:]))
    overrides["output_shape"] = responses.shape[1:]
    config = tcn.TcnConfig(**overrides)
    model = tcn.init_model(config)
    t0 = time.perf_counter()
    trained, trace = tcn.train(model, factors, responses)
    seconds = time.perf_counter() - t0
    tcn.save_checkpoint(args.out, trained)
    fields = {
        "command": "train",
        "data": args.data,
        "loadings": args.loadings,
        "out": args.out,
        "n": len(factors),
        "initial_train_loss": float(trace[0]),
        "final_train_loss": float(trace[-1]),
        "epochs_run": len(trace) - 1,
        "seconds.train": seconds,
    }
    fields.update({f"config.{k}": v for k, v in sorted(vars(config).items())
                   if not k.startswith("_")})
    _emit(args, fields)
    return 0


def _cmd_forecast(args) -> int:
    covariates, responses = io.read_series(args.data)
    loadings, _, _ = io.read_loadings(args.loadings)
    model = tcn.load_checkpoint(args.model)
    factors = extract_factors(covariates, loadings)
    horizon = args.horizon
    if horizon is None or horizon < 0:
        raise ConfigError("--horizon must be given and nonnegative")
    if horizon > len(factors):
        raise DataError(f"horizon {horizon} exceeds series length {len(factors)}")
    known = None
    if model.config.use_lagged_response:
        if responses is None:
            raise DataError("lagged-response model needs responses in the data file")
        known = responses[: len(factors) - horizon]
    t0 = time.perf_counter()
    predictions = tcn.forecast(model, factors, horizon, known_responses=known)
    seconds = time.perf_counter() - t0
    io.write_series(args.out, predictions)
    if args.csv:
        _write_forecast_csv(args.csv, predictions, start=len(factors) - horizon)
    _emit(args, {
        "command": "forecast",
        "data": args.data,
        "model": args.model,
        "out": args.out,
        "horizon": horizon,
        "seconds.forecast": seconds,
    })
    return 0


def _write_forecast_csv(path, predictions: np.ndarray, start: int) -> None:
    flat = predictions.reshape(len(predictions), -1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(f"y{j}" for j in range(flat.shape[1])) + "\n")
        for i, row in enumerate(flat):
            fh.write(f"{start + i}," + ",".join(repr(v) for v in row) + "\n")


def _series_payload(path):
    """Prediction/observation files may carry the series in either block."""
    covariates, responses = io.read_series(path)
    return responses if responses is not None else covariates


def _cmd_evaluate(args) -> int:
    observed = _series_payload(args.observed)
    predicted = _series_payload(args.predicted)
    if args.tail is not None:
        if not 1 <= args.tail <= len(observed):
            raise ConfigError(f"--tail {args.tail} out of range for n={len(observed)}")
        observed = observed[-args.tail:]
    if observed.shape != predicted.shape:
        raise DataError(
            f"observed {observed.shape} and predicted {predicted.shape} do not match"
        )
    errors = harness.per_sample_errors(observed, predicted)
    point = float(np.mean(errors))
    lo, hi = harness.bootstrap_ci(errors, reps=args.bootstrap, seed=args.seed)
    _emit(args, {
        "command": "evaluate",
        "observed": args.observed,
        "predicted": args.predicted,
        "n_test": len(observed),
        "test_mse": point,
        "ci_lo": lo,
        "ci_hi": hi,
        "bootstrap_reps": args.bootstrap,
    })
    return 0


def _cmd_bench(args) -> int:
    seeds = [int(s) for s in _int_tuple(args.seeds)]
    if not seeds:
        raise ConfigError("--seeds must name at least one seed")
    overrides = _tcn_overrides_from_args(args)
    rows = []
    fields = {"command": "bench", "split_ratio": args.split_ratio, "seeds": seeds}
    for seed in seeds:
        true_ranks = None
        if args.data:
            covariates, responses = io.read_series(args.data)
            if responses is None:
                raise DataError(f"{args.data} has no response block")
        else:
            cfg = _sim_config_from_args(args)
            cfg = simgen.SimConfig(**{**vars(cfg), "seed": seed})
            data = simgen.generate(cfg)
            covariates, responses = data.covariates, data.responses
            true_ranks = cfg.ranks
        per_seed = dict(overrides)
        per_seed["seed"] = seed
        if args.ranks:
            ranks = _int_tuple(args.ranks)
        elif true_ranks is not None:
            # Simulated data: the generating ranks are the fair choice.
            ranks = true_ranks
        else:
            ranks = "auto"
        factor_report = harness.run_factor_tcn(
            covariates, responses, ranks=ranks, split_ratio=args.split_ratio,
            tcn_overrides=per_seed, bootstrap_seed=seed,
        )
        raw_report = harness.run_raw_tcn(
            covariates, responses, split_ratio=args.split_ratio,
            tcn_overrides=per_seed, bootstrap_seed=seed,
        )
        rows.append((seed, factor_report, raw_report))
        prefix = f"seed{seed}."
        fields[prefix + "factor_mse"] = factor_report.test_mse
        fields[prefix + "raw_mse"] = raw_report.test_mse
        fields[prefix + "factor_seconds"] = factor_report.seconds["total"]
        fields[prefix + "raw_seconds"] = raw_report.seconds["total"]
    factor_mses = [fr.test_mse for _, fr, _ in rows]
    raw_mses = [rr.test_mse for _, _, rr in rows]
    fields["mean_factor_mse"] = float(np.mean(factor_mses))
    fields["mean_raw_mse"] = float(np.mean(raw_mses))
    fields["mse_ratio"] = float(np.mean(factor_mses) / np.mean(raw_mses))
    factor_secs = [fr.seconds["total"] for _, fr, _ in rows]
    raw_secs = [rr.seconds["total"] for _, _, rr in rows]
    fields["mean_factor_seconds"] = float(np.mean(factor_secs))
    fields["mean_raw_seconds"] = float(np.mean(raw_secs))
    fields["time_ratio"] = float(np.mean(factor_secs) / np.mean(raw_secs))
    for key, value in rows[0][1].config.items():
        fields[f"config.{key}"] = value
    _emit(args, fields)
    return 0


def _cmd_rate_diag(args) -> int:
    rows = rate_trend_diagnostic(
        dims=_int_tuple(args.dims),
        ranks=_int_tuple(args.ranks),
        lambda_grid=_float_list(args.lambdas),
        n_grid=_int_tuple(args.ns),
        seeds=range(args.n_seeds),
    )
    fields = {
        "command": "rate-diag",
        "dims": _int_tuple(args.dims),
        "ranks": _int_tuple(args.ranks),
        "n_seeds": args.n_seeds,
    }
    for row in rows:
        key = f"lambda{row['lambda']:g}.n{row['n']}"
        fields[f"{key}.median_sin_theta"] = row["median_sin_theta"]
        fields[f"{key}.seconds"] = row["seconds"]
    _emit(args, fields)
    return 0


def build_parser() -> _TrackingParser:
    parser = _TrackingParser(prog="factorcast")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="generate a synthetic dataset file")
    sim.add_argument("--config", help="key-value config file with flag defaults")
    sim.add_argument("--preset", type=int, choices=(1, 2, 3))
    sim.add_argument("--dims")
    sim.add_argument("--ranks")
    sim.add_argument("--response-dims")
    sim.add_argument("--n", type=int)
    sim.add_argument("--transform", choices=sorted(simgen.TRANSFORMS))
    sim.add_argument("--sigma-u2", type=float, dest="sigma_u2")
    sim.add_argument("--rho", type=float)
    sim.add_argument("--lam", type=float)
    sim.add_argument("--sigma-w", type=float, dest="sigma_w")
    sim.add_argument("--sigma-e", type=float, dest="sigma_e")
    sim.add_argument("--burn-in", type=int, dest="burn_in")
    sim.add_argument("--cp-rank", type=int, dest="cp_rank")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--report")
    sim.set_defaults(func=_cmd_simulate)

    fit = subs.add_parser("fit-factors", help="estimate loading matrices from a series file")
    fit.add_argument("--config")
    fit.add_argument("--data", required=True)
    fit.add_argument("--ranks", help="comma-separated; omit to select automatically")
    fit.add_argument("--r-max", dest="r_max", help="per-mode cap for automatic selection")
    fit.add_argument("--eps", type=float, default=1e-6)
    fit.add_argument("--max-iter", type=int, default=30)
    fit.add_argument("--out", required=True)
    fit.add_argument("--report")
    fit.set_defaults(func=_cmd_fit_factors)

    tr = subs.add_parser("train", help="train the forecaster on extracted factors")
    tr.add_argument("--config")
    tr.add_argument("--data", required=True)
    tr.add_argument("--loadings", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--report")
    _add_tcn_flags(tr)
    tr.set_defaults(func=_cmd_train)

    fc = subs.add_parser("forecast", help="predict the trailing time steps of a series")
    fc.add_argument("--config")
    fc.add_argument("--data", required=True)
    fc.add_argument("--loadings", required=True)
    fc.add_argument("--model", required=True)
    fc.add_argument("--horizon", type=int, required=True)
    fc.add_argument("--out", required=True)
    fc.add_argument("--csv", help="also write per-step forecasts as CSV")
    fc.add_argument("--report")
    fc.set_defaults(func=_cmd_forecast)

    ev = subs.add_parser("evaluate", help="score predictions against observations")
    ev.add_argument("--config")
    ev.add_argument("--observed", required=True)
    ev.add_argument("--predicted", required=True)
    ev.add_argument("--tail", type=int, help="score only the last TAIL observations")
    ev.add_argument("--bootstrap", type=int, default=harness.DEFAULT_BOOTSTRAP_REPS)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--report")
    ev.set_defaults(func=_cmd_evaluate)

    bench = subs.add_parser(
        "bench", help="factor pipeline vs raw baseline on simulated or file data"
    )
    bench.add_argument("--config")
    bench.add_argument("--data", help="series file; omit to simulate per seed")
    bench.add_argument("--preset", type=int, choices=(1, 2, 3))
    bench.add_argument("--dims")
    bench.add_argument("--ranks", help="fitting ranks (and simulation ranks with "
                       "--dims); defaults to the generating ranks on simulated "
                       "data, automatic selection on file data")
    bench.add_argument("--response-dims")
    bench.add_argument("--n", type=int)
    bench.add_argument("--transform", choices=sorted(simgen.TRANSFORMS))
    bench.add_argument("--sigma-u2", type=float, dest="sigma_u2")
    bench.add_argument("--rho", type=float)
    bench.add_argument("--lam", type=float)
    bench.add_argument("--sigma-w", type=float, dest="sigma_w")
    bench.add_argument("--sigma-e", type=float, dest="sigma_e")
    bench.add_argument("--burn-in", type=int, dest="burn_in")
    bench.add_argument("--cp-rank", type=int, dest="cp_rank")
    bench.add_argument("--seed", type=int, default=0, help="unused; see --seeds")
    bench.add_argument("--seeds", default="0,1,2,3,4")
    bench.add_argument("--split-ratio", type=float, default=0.7)
    bench.add_argument("--report")
    # Early stopping is off by default here: the method comparison needs
    # identical, data-independent budgets for the wall-clock contrast.
    _add_tcn_flags(bench, patience=0)
    bench.set_defaults(func=_cmd_bench)

    rd = subs.add_parser("rate-diag", help="subspace error trend over scale and length")
    rd.add_argument("--config")
    rd.add_argument("--dims", default="12,3,12")
    rd.add_argument("--ranks", default="4,3,4")
    rd.add_argument("--lambdas", default="6.928203230275509,27.712812921102035")
    rd.add_argument("--ns", default="100,200,400")
    rd.add_argument("--n-seeds", type=int, default=20, dest="n_seeds")
    rd.add_argument("--report")
    rd.set_defaults(func=_cmd_rate_diag)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, parser)
        return args.func(args)
    except FactorcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3 if isinstance(exc, OSError) else 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
