"""Command-line pipeline: generate, train, evaluate, recommend, diagnose,
curves, serve.

Every command writes its outputs under --out together with a manifest.json
holding the full configuration, so a run is reproducible from the manifest
alone. Exit codes: 1 for IO failures, 2 for usage errors, 3 for validation
failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, dataio
from .baselines import DEFAULT_RULE_TABLE, RuleTable
from .cadr import (
    cadr_curve,
    curve_to_csv_rows,
    deserialize_cadr,
    fit_cadr,
    serialize_cadr,
)
from .domain import CaseFeatures, DomainError, DoseGrid, Sex, UtilityWeights
from .learners import LearnerError, LearnerKind, Task
from .recommendation import recommend_dose
from .service import load_snapshot
from .synthgen import ScmGroundTruth, generate_cohort
from .validation import (
    CadrPolicy,
    OverlapDiagnostic,
    ProxyMarkerPolicy,
    RuleBasedPolicy,
    SplitSpec,
    evaluate_methods,
    overlap_diagnostic,
    split,
)

EXIT_IO = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_weights(text: str) -> UtilityWeights:
    try:
        wp, wo = (float(v) for v in text.split(","))
        return UtilityWeights(w_pain=wp, w_orades=wo)
    except (ValueError, DomainError) as exc:
        raise CliError(f"invalid --weights {text!r}: {exc}", EXIT_USAGE) from None


def _parse_grid(text: str) -> DoseGrid:
    try:
        lo, hi, step = (float(v) for v in text.split(","))
        return DoseGrid(min_meq=lo, max_meq=hi, step_meq=step)
    except (ValueError, DomainError) as exc:
        raise CliError(f"invalid --grid {text!r}: {exc}", EXIT_USAGE) from None


def _read_json(path: str, what: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} file not found: {p}", EXIT_IO)
    try:
        return json.loads(p.read_text())
    except ValueError as exc:
        raise CliError(f"unreadable {what} file {p}: {exc}", EXIT_VALIDATION) from None


def _load_case(path: str) -> CaseFeatures:
    payload = _read_json(path, "case")
    try:
        return CaseFeatures(
            age=int(payload["age"]),
            weight_kg=float(payload["weight_kg"]),
            sex=Sex(payload["sex"]),
            asa_class=int(payload["asa_class"]),
            surgery_duration_min=float(payload["surgery_duration_min"]),
            surgery_type=int(payload["surgery_type"]),
            chronic_opioid_use=bool(payload["chronic_opioid_use"]),
            comorbidity_score=float(payload["comorbidity_score"]),
        )
    except KeyError as exc:
        raise CliError(f"case file missing field {exc}", EXIT_VALIDATION) from None
    except (ValueError, DomainError) as exc:
        raise CliError(f"invalid case file: {exc}", EXIT_VALIDATION) from None


def _load_model(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"model artifact not found: {p}", EXIT_IO)
    try:
        return deserialize_cadr(p.read_bytes())
    except LearnerError as exc:
        raise CliError(f"cannot load model {p}: {exc}", EXIT_VALIDATION) from None


def _write_manifest(out_dir: Path, command: str, config: dict,
                    results: dict | None = None) -> None:
    manifest = {
        "tool": "doselab",
        "tool_version": __version__,
        "command": command,
        "config": config,
    }
    if results is not None:
        manifest["results"] = results
    dataio.atomic_write_text(out_dir / "manifest.json",
                             json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _apply_config_overrides(args: argparse.Namespace) -> None:
    """Values from --config override the corresponding flags."""
    if not getattr(args, "config", None):
        return
    overrides = _read_json(args.config, "config")
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise CliError(f"config key {key!r} is not a flag of this command",
                           EXIT_USAGE)
        setattr(args, attr, value)


# Commands ------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.n < 1:
        raise CliError(f"--n must be >= 1, got {args.n}", EXIT_USAGE)
    if args.scm is not None:
        gt = dataio.scm_from_dict(_read_json(args.scm, "scm"))
    else:
        gt = ScmGroundTruth()
    if args.noiseless:
        gt = gt.noiseless()
    cohort = generate_cohort(gt, args.n, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = dataio.write_cohort(cohort, out)
    _write_manifest(out, "generate", {
        "scm": args.scm, "n": args.n, "seed": args.seed,
        "noiseless": args.noiseless,
    })
    print(json.dumps({"written": {k: str(v) for k, v in paths.items()},
                      "n_records": len(cohort.records)}, indent=2))
    return 0


def _split_cohort(cohort_dir: str, split_seed: int):
    src = Path(cohort_dir)
    if not src.exists():
        raise CliError(f"cohort directory not found: {src}", EXIT_IO)
    cohort = dataio.read_cohort(src)
    spec = SplitSpec(seed=split_seed)
    train_r, test_r, ret_r = split(cohort.records, spec)
    return cohort, spec, train_r, test_r, ret_r


def cmd_train(args) -> int:
    cohort, spec, train_r, _, _ = _split_cohort(args.cohort, args.split_seed)
    grid = _parse_grid(args.grid)
    kinds = []
    for name in args.learners.split(","):
        try:
            kinds.append(LearnerKind(name.strip()))
        except ValueError:
            raise CliError(f"unknown learner kind {name.strip()!r}", EXIT_USAGE) from None
    pain_task = Task(args.pain_task) if args.pain_task else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for kind in kinds:
        model = fit_cadr(train_r, kind, kind, grid=grid, seed=args.seed,
                         pain_task=pain_task)
        artifact = out / f"model_{kind.value}.json"
        dataio.atomic_write_bytes(artifact, serialize_cadr(model))
        curves_file = out / f"loss_curves_{kind.value}.csv"
        lines = ["endpoint,round,train_loss,val_loss"]
        for endpoint, fitted in (("pain", model.pain_model),
                                 ("orade", model.orade_model)):
            for r, tr, va in fitted.loss_curve:
                lines.append(f"{endpoint},{r},{tr!r},{va!r}")
        dataio.atomic_write_text(curves_file, "\n".join(lines) + "\n")
        written[kind.value] = str(artifact)
    _write_manifest(out, "train", {
        "cohort": args.cohort, "learners": args.learners, "seed": args.seed,
        "split_seed": args.split_seed, "grid": args.grid,
        "pain_task": args.pain_task,
    })
    print(json.dumps({"written": written}, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not args.force:
        previous = json.loads(manifest_path.read_text())
        if previous.get("config", {}).get("retention_used"):
            raise CliError(
                f"retention split already consumed for {out} "
                "(rerun with --force to acknowledge reuse)", EXIT_VALIDATION)
    cohort, spec, train_r, test_r, ret_r = _split_cohort(args.cohort, args.split_seed)
    grid = _parse_grid(args.grid)
    w = _parse_weights(args.weights)
    models_dir = Path(args.models)
    if not models_dir.exists():
        raise CliError(f"models directory not found: {models_dir}", EXIT_IO)
    artifacts = sorted(models_dir.glob("model_*.json"))
    if not artifacts:
        raise CliError(f"no model_*.json artifacts in {models_dir}", EXIT_VALIDATION)
    methods = [CadrPolicy(_load_model(str(p)), w) for p in artifacts]
    table = (RuleTable.from_json(Path(args.rules).read_text())
             if args.rules else DEFAULT_RULE_TABLE)
    methods.append(RuleBasedPolicy(table, dose_max=grid.max_meq))
    methods.append(ProxyMarkerPolicy.fit(train_r, grid=grid, seed=args.seed))
    result = evaluate_methods(cohort, methods, w=w, spec=spec, grid=grid,
                              test_records=test_r, retention_records=ret_r)
    out.mkdir(parents=True, exist_ok=True)
    dataio.atomic_write_text(out / "reports.json",
                             json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    lines = ["method_id,regret,dose_mae,rmse_pain,rmse_orade,accuracy,auc,overfit"]
    for r in result.reports:
        lines.append(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v))
                              for v in (r.method_id, r.regret, r.dose_mae, r.rmse_pain,
                                        r.rmse_orade, r.accuracy, r.auc, r.overfit)))
    dataio.atomic_write_text(out / "reports.csv", "\n".join(lines) + "\n")
    _write_manifest(out, "evaluate", {
        "cohort": args.cohort, "models": args.models, "weights": args.weights,
        "seed": args.seed, "split_seed": args.split_seed, "grid": args.grid,
        "rules": args.rules, "retention_used": True,
    }, results=result.to_dict())
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_recommend(args) -> int:
    model = _load_model(args.model)
    x = _load_case(args.case)
    w = _parse_weights(args.weights)
    diagnostics = None
    if args.diagnostics:
        diagnostics = OverlapDiagnostic.from_dict(
            _read_json(args.diagnostics, "diagnostics"))
    rec = recommend_dose(model, x, w=w, diagnostics=diagnostics)
    print(json.dumps(rec.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_diagnose(args) -> int:
    src = Path(args.cohort)
    if not src.exists():
        raise CliError(f"cohort directory not found: {src}", EXIT_IO)
    cohort = dataio.read_cohort(src)
    grid = _parse_grid(args.grid)
    diag = overlap_diagnostic(cohort.records, grid=grid, n_strata=args.strata,
                              n_dose_bins=args.dose_bins, min_count=args.min_count)
    text = json.dumps(diag.to_dict(), indent=2, sort_keys=True)
    if args.out:
        dataio.atomic_write_text(Path(args.out), text + "\n")
    print(text)
    return 0


def cmd_curves(args) -> int:
    model = _load_model(args.model)
    x = _load_case(args.case)
    w = _parse_weights(args.weights)
    curve = cadr_curve(model, x, w=w)
    dataio.atomic_write_text(Path(args.out), "\n".join(curve_to_csv_rows(curve)) + "\n")
    print(json.dumps({"written": args.out, "n_points": len(curve.doses)}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model_path = Path(args.model_artifact)
    if not model_path.exists():
        raise CliError(f"model artifact not found: {model_path}", EXIT_IO)
    grid_override = _parse_grid(args.grid) if args.grid else None
    snapshot = load_snapshot(model_path, args.diagnostics,
                             default_weights=_parse_weights(args.default_weights),
                             grid_override=grid_override)
    app = create_app(snapshot)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doselab",
        description="Synthetic-cohort opioid dose recommendation pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic cohort")
    p.add_argument("--scm", help="ground-truth JSON (defaults to the built-in SCM)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--noiseless", action="store_true",
                   help="zero all outcome noise (policy noise kept)")
    p.add_argument("--config", help="JSON config file; overrides flags")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit dose-response models on the train split")
    p.add_argument("--cohort", required=True)
    p.add_argument("--learners", required=True,
                   help="comma-separated learner kinds")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--grid", default="0,20,0.5", help="min,max,step in MEQ")
    p.add_argument("--pain-task", choices=["regression", "classification"])
    p.add_argument("--config", help="JSON config file; overrides flags")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate",
                       help="rank methods by oracle regret on the retention split")
    p.add_argument("--cohort", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--weights", default="0.5,0.5")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--grid", default="0,20,0.5")
    p.add_argument("--rules", help="rule table JSON (defaults to the shipped table)")
    p.add_argument("--force", action="store_true",
                   help="allow re-reading an already-consumed retention split")
    p.add_argument("--config", help="JSON config file; overrides flags")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recommend", help="print a recommendation for one case")
    p.add_argument("--model", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--weights", default="0.5,0.5")
    p.add_argument("--diagnostics")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("diagnose", help="print the dose-overlap table")
    p.add_argument("--cohort", required=True)
    p.add_argument("--grid", default="0,20,0.5")
    p.add_argument("--strata", type=int, default=5)
    p.add_argument("--dose-bins", type=int, default=10)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("curves", help="write a plot-ready curve CSV for one case")
    p.add_argument("--model", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--weights", default="0.5,0.5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model-artifact", required=True)
    p.add_argument("--diagnostics")
    p.add_argument("--grid", help="override the artifact's dose grid (min,max,step)")
    p.add_argument("--default-weights", default="0.5,0.5")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8442)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_overrides(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DomainError, LearnerError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
