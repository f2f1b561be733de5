"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 singular Gram matrix.
"""

import argparse
import json
from pathlib import Path
import sys

from .bounds import BoundInputs, aux_benefit_condition, theorem1_bound
from .estimator import WeightSchedule, error_metrics, select_weight_cv, wls
from .exceptions import ConfigurationError, ShapeError, SingularGramError
from .experiments import emit_csv, load_config, paper_models, run_scenario, spec_from_config
from .simulate import assemble_batch, read_rollouts_csv, simulate_rollouts, write_rollouts_csv
from .systems import SystemModel, load_model, save_model

EXIT_CONFIG = 2
EXIT_SINGULAR = 3


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _schedule_from_args(args):
    given = [args.q is not None, args.q_steps is not None, args.decay is not None]
    if sum(given) > 1:
        raise ConfigurationError("use only one of --q, --q-steps, --decay")
    if args.q_steps is not None:
        return WeightSchedule.per_step(args.q_steps)
    if args.decay is not None:
        return WeightSchedule.decaying(args.decay)
    return WeightSchedule.constant(1.0 if args.q is None else args.q)


def _load_rollouts(paths):
    sets = {}
    for path in paths:
        for system, rs in read_rollouts_csv(path).items():
            if system in sets:
                raise ConfigurationError(f"system {system!r} appears in more than one file")
            sets[system] = rs
    if "true" not in sets:
        raise ConfigurationError("no rollouts labelled 'true' were given")
    return sets["true"], sets.get("aux")


def cmd_simulate(args):
    model = load_model(args.model) if args.model else paper_models()[args.system == "aux"]
    rollouts = simulate_rollouts(model, args.count, args.seed, system=args.system)
    write_rollouts_csv(args.out, rollouts)
    print(f"wrote {len(rollouts)} {args.system} rollouts (T={model.horizon}) to {args.out}")


def cmd_estimate(args):
    true_roll, aux_roll = _load_rollouts(args.rollouts)
    schedule = _schedule_from_args(args)
    batch = assemble_batch(true_roll, aux_roll)
    est = wls(batch, schedule, ridge=args.ridge)
    print(f"weights: {schedule.label}")
    print(f"columns: {est.n_columns} (true rollouts {batch.n_true}, aux rollouts {batch.n_aux})")
    print(f"gram_min_eig: {est.gram_min_eig:.6g}")
    print("A_hat =")
    print(est.a_hat)
    print("B_hat =")
    print(est.b_hat)
    if args.true_model:
        truth = load_model(args.true_model)
        m = error_metrics(est, truth.theta())
        print(f"err_theta={m.err_theta:.17g}")
        print(f"err_a={m.err_a:.17g}")
        print(f"err_b={m.err_b:.17g}")
    if args.out:
        model = SystemModel.lti(est.a_hat, est.b_hat, horizon=batch.horizon)
        save_model(model, args.out, extra=est.metadata())
        print(f"wrote estimate to {args.out}")


def cmd_bound(args):
    cfg = load_config(args.config)
    base = Path(args.config).parent
    try:
        true_model = load_model(base / cfg["true_model"]) if "true_model" in cfg else paper_models()[0]
        aux_model = load_model(base / cfg["aux_model"]) if "aux_model" in cfg else paper_models()[1]
        n_true, n_aux = int(cfg["n_true"]), int(cfg["n_aux"])
        if "q_steps" in cfg:
            schedule = WeightSchedule.per_step(cfg["q_steps"])
        else:
            schedule = WeightSchedule.constant(cfg.get("q", 1.0))
        delta = args.delta if args.delta is not None else float(cfg.get("delta", 0.05))
        inputs = BoundInputs.from_models(true_model, aux_model, n_true, n_aux, schedule, delta)
    except (KeyError, TypeError, OSError) as exc:
        raise ConfigurationError(f"bad bound config: {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    res = theorem1_bound(inputs)
    verdict = None
    if schedule.kind == "constant" and true_model.time_invariant and aux_model.time_invariant:
        verdict = aux_benefit_condition(inputs)

    print(f"N_r={n_true} N_p={n_aux} {schedule.label} delta={delta:g} "
          f"(confidence {res.confidence:.3g})")
    print(f"thresholds: N_0={res.n0:.4f} N_1={res.n1:.4f} "
          f"{'met' if res.thresholds_met else 'NOT met: bound is not guaranteed'}")
    print(f"error due to noise:            {res.noise_term:.6g}")
    print(f"error due to model difference: {res.bias_term:.6g}")
    print(f"total bound:                   {res.total:.6g}")
    if verdict is not None:
        print(f"auxiliary data shrinks the bound: {'yes' if verdict.holds else 'not guaranteed'} "
              f"(lhs {verdict.lhs:.6g} vs rhs {verdict.rhs:.6g})")
    print("---")
    kv = {
        "noise_term": res.noise_term, "bias_term": res.bias_term, "total": res.total,
        "confidence": res.confidence, "N0": res.n0, "N1": res.n1,
        "thresholds_met": res.thresholds_met,
    }
    if verdict is not None:
        kv.update(aux_benefit=verdict.holds, aux_benefit_lhs=verdict.lhs,
                  aux_benefit_rhs=verdict.rhs)
    for key, value in kv.items():
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, float):
            value = f"{value:.17g}"
        print(f"{key}={value}")


def cmd_experiment(args):
    cfg = load_config(args.config) if args.config else {}
    base = Path(args.config).parent if args.config else Path(".")
    if args.repetitions is not None:
        cfg["repetitions"] = args.repetitions
    spec = spec_from_config(args.scenario, cfg, seed=args.seed_given, delta=args.delta,
                            base_dir=base)
    result = run_scenario(spec)
    emit_csv(result, args.out)
    print(f"scenario {spec.scenario}: {len(result.rows)} rows written to {args.out}")


def cmd_cv_select(args):
    true_roll, aux_roll = _load_rollouts(args.rollouts)
    choice, scores = select_weight_cv(true_roll, aux_roll, args.candidates, args.folds,
                                      args.seed, return_scores=True)
    for label, score in scores.items():
        print(f"{label}: mean held-out MSE {score:.6g}")
    print(f"chosen_q={choice:.17g}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master random seed (default 0)")
    common.add_argument("--delta", type=float, default=argparse.SUPPRESS,
                        help="failure probability parameter for bounds")

    parser = argparse.ArgumentParser(prog="auxsysid", parents=[common], description=(
        "Weighted least squares identification with auxiliary-system data."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="model file -> rollout CSV")
    p.add_argument("--model", help="model JSON (default: the built-in example pair)")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--system", choices=["true", "aux"], default="true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="rollout CSVs -> estimated model")
    p.add_argument("--rollouts", nargs="+", required=True)
    p.add_argument("--q", type=float, help="constant auxiliary weight (default 1)")
    p.add_argument("--q-steps", type=_float_list, help="per-step weights q_0,...,q_{T-1}")
    p.add_argument("--decay", type=float, help="weight c/sqrt(N_r)")
    p.add_argument("--ridge", action="store_true", help="regularize a singular Gram matrix")
    p.add_argument("--true-model", help="report errors against this model")
    p.add_argument("--out", help="write the estimate as a model JSON")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bound", parents=[common], help="evaluate the error bound")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("experiment", parents=[common], help="run a Monte-Carlo scenario")
    p.add_argument("--scenario", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--config")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("cv-select", parents=[common], help="choose q by cross-validation")
    p.add_argument("--rollouts", nargs="+", required=True)
    p.add_argument("--candidates", type=_float_list, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_cv_select)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.seed_given = getattr(args, "seed", None)
    if not hasattr(args, "seed"):
        args.seed = 0
    if not hasattr(args, "delta"):
        args.delta = None
    elif not 0 < args.delta < 0.25:
        print("error: --delta must lie in (0, 0.25)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except SingularGramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ConfigurationError, ShapeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
