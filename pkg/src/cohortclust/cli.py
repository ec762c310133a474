"""Batch command line: ``cohortclust {profile,pipeline,sweep,synth}``.

Exit codes: 0 success, 2 input/config error, 3 pipeline-stage failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_kv
from .datamodel import DataError, dump_dataset, missingness_profile, write_schema
from .pipeline import OutputDir, StageError, csv_text, json_text, load_from_config, run_pipeline, run_sweep, truth_rows
from .synth import SyntheticSpec, generate

log = logging.getLogger("cohortclust")

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 2, 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (must not exist unless --force)")
    p.add_argument("--force", action="store_true", help="overwrite an existing output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")


def _data_args(p: argparse.ArgumentParser):
    p.add_argument("--input", help="delimited data table")
    p.add_argument("--schema", help="schema sidecar (name kind role per line)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohortclust", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="missingness report")
    _common(p)
    _data_args(p)

    p = sub.add_parser("pipeline", help="full sweep / selection / consensus / characterisation run")
    _common(p)
    _data_args(p)
    p.add_argument("--truth", help="patient_id,label file to score the consensus against")

    p = sub.add_parser("sweep", help="robustness sweep over patients or attributes")
    _common(p)
    _data_args(p)
    p.add_argument("--mode", choices=("patients", "attributes"), required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort with planted clusters")
    p.add_argument("spec", nargs="?", help="key = value synthetic spec file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for key in ("seed", "out", "input", "schema", "truth"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if args.force:
        out["force"] = True
    return out


def _config(args) -> RunConfig:
    overrides = _overrides(args)
    if args.config:
        try:
            return RunConfig.load(args.config, overrides)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    return RunConfig.from_mapping(overrides)


def cmd_profile(args) -> int:
    cfg = _config(args).validate()
    out = OutputDir(cfg.out, cfg.force)
    try:
        d = load_from_config(cfg)
        rep = missingness_profile(d)
        out.write("profile.json", json_text({
            "n_patients": d.n_patients,
            "n_attributes": d.n_attributes,
            **rep.to_dict(),
        }))
        out.write("profile_attributes.csv", csv_text(
            [["attribute", "missing_fraction"], *rep.per_attribute.items()]))
        out.write("profile_patients.csv", csv_text(
            [["patient_id", "missing_fraction"], *rep.per_patient.items()]))
    except BaseException:
        out.abort()
        raise
    out.commit()
    print(f"{d.n_patients} patients x {d.n_attributes} attributes, "
          f"{100 * rep.overall_fraction:.2f}% missing -> {cfg.out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args).validate()
    out = OutputDir(cfg.out, cfg.force)
    try:
        result = run_pipeline(cfg)
        for name, text in result.files.items():
            out.write(name, text)
    except BaseException:
        out.abort()
        raise
    out.commit()
    rep = result.report
    print(f"chosen k = {rep['chosen_k']} (without Friedman: "
          f"{rep['selection']['without_friedman']['chosen_k']}); "
          f"unassigned {rep['consensus']['unassigned_count']} -> {cfg.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args).validate()
    out = OutputDir(cfg.out, cfg.force)
    try:
        curve = run_sweep(cfg, args.mode)
        out.write(f"sweep_{args.mode}.csv", csv_text(curve.to_rows()))
        out.write(f"sweep_{args.mode}.json", json_text({"config": cfg.resolved(), **curve.to_dict()}))
    except BaseException:
        out.abort()
        raise
    out.commit()
    for w in curve.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{len(curve.sizes)} sweep points, chosen k {curve.chosen_k} -> {cfg.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    data = {}
    if args.spec:
        try:
            data = parse_kv(Path(args.spec).read_text(encoding="utf-8"), args.spec)
        except OSError as exc:
            raise ConfigError(f"cannot read spec: {exc}") from None
    for item in args.set:
        key, _, value = item.partition("=")
        data[key.strip()] = value.strip()
    if args.seed is not None:
        data["seed"] = args.seed
    spec = SyntheticSpec.from_mapping(data)
    out = OutputDir(args.out, args.force)
    try:
        d, truth = generate(spec)
        out.write("data.csv", dump_dataset(d))
        out.write("schema.txt", "patient_id categorical identifier\n" + write_schema(d.specs))
        out.write("truth.csv", csv_text(truth_rows(d.patient_ids, truth.labels)))
        out.write("synth_spec.json", json_text(spec.to_dict()))
    except BaseException:
        out.abort()
        raise
    out.commit()
    print(f"{d.n_patients} patients, k_true = {spec.k_true} -> {args.out}")
    return EXIT_OK


COMMANDS = {"profile": cmd_profile, "pipeline": cmd_pipeline, "sweep": cmd_sweep, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
