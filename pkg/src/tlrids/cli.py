"""Command-line driver: synth, train, detect, bench, scatter.

Every output file starts with comment headers embedding the seed, the
tissue-parameter digest and the dataset digest, so two runs with equal
triples are byte-identical (no timestamps anywhere).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchConfig, run_bench
from .engine import (
    VARIANTS,
    TrainedProfile,
    build_detector,
    train,
    write_alert_log,
    write_probe_log,
)
from .errors import ProfileError, ScenarioError, TlridsError
from .report import emit_machine, emit_scatter, emit_table
from .scenarios import assemble_timeline, read_roster, write_roster
from .sessions import Dataset, SessionLabel, dataset_hash, load_dataset, save_dataset
from .synth import SynthProfile, default_profile, synth_dataset
from .tissue import TissueParams

_PROFILE_RANGE_KEYS = (
    "events_per_session",
    "duration_s",
    "attack_events_per_session",
    "attack_duration_s",
)
_PROFILE_SCALAR_KEYS = {
    "universe_size": int,
    "overlap_fraction": float,
    "jitter_prob": float,
    "attack_event_fraction": float,
    "n_rare_vocab": int,
}


def _load_profile_file(path: str) -> dict:
    """Parse a ``key value`` synth-profile override file."""
    overrides: dict = {}
    for no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key in _PROFILE_RANGE_KEYS:
                overrides[key] = (int(parts[1]), int(parts[2]))
            elif key in _PROFILE_SCALAR_KEYS:
                overrides[key] = _PROFILE_SCALAR_KEYS[key](parts[1])
            else:
                raise ProfileError(f"{path}:{no}: unknown profile field {key!r}")
        except (IndexError, ValueError):
            raise ProfileError(f"{path}:{no}: bad value for field {key!r}")
    return overrides


def profile_digest(profile: SynthProfile) -> str:
    body = ";".join(
        f"{f.name}={getattr(profile, f.name)}" for f in dc_fields(profile)
    )
    return hashlib.sha256(body.encode()).hexdigest()[:16]


def _parse_params(pairs: list[str]) -> TissueParams:
    overrides: dict[str, int] = {}
    valid = {f.name for f in dc_fields(TissueParams)}
    for pair in pairs or []:
        if "=" not in pair:
            raise TlridsError(f"--param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        if key not in valid:
            raise TlridsError(f"unknown tissue parameter {key!r}")
        try:
            overrides[key] = int(value)
        except ValueError:
            raise TlridsError(f"parameter {key} needs an integer, got {value!r}")
    params = TissueParams(**overrides)
    params.validate()
    return params


def _load_detector_config(path: str) -> dict:
    """Detector config file: variant, seed, exhaustive, param lines."""
    config: dict = {"param": []}
    for no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "variant":
                config["variant"] = parts[1]
            elif key == "seed":
                config["seed"] = int(parts[1])
            elif key == "exhaustive":
                config["exhaustive"] = parts[1] in ("1", "true", "yes")
            elif key == "param":
                config["param"].append(f"{parts[1]}={parts[2]}")
            else:
                raise TlridsError(f"{path}:{no}: unknown config key {key!r}")
        except IndexError:
            raise TlridsError(f"{path}:{no}: bad value for {key!r}")
    return config


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args: argparse.Namespace) -> int:
    overrides = _load_profile_file(args.profile_file) if args.profile_file else {}
    if args.universe is not None:
        overrides["universe_size"] = args.universe
    if args.overlap is not None:
        overrides["overlap_fraction"] = args.overlap
    profile = default_profile(**overrides)
    rng = np.random.default_rng(args.seed)
    dataset = synth_dataset(rng, profile, n_normal=args.normals)
    header = (
        f"synthetic dataset\nseed={args.seed}\n"
        f"profile={profile_digest(profile)}\n"
        f"normals={args.normals}"
    )
    manifest = save_dataset(dataset, args.out, header=header)
    print(f"wrote {len(dataset.sessions)} sessions under {manifest.parent}")
    return 0


def _load_dataset(path: str) -> tuple[Dataset, str]:
    dataset = load_dataset(path)
    return dataset, dataset_hash(path)


def cmd_train(args: argparse.Namespace) -> int:
    dataset, ds_digest = _load_dataset(args.dataset)
    if args.sessions:
        wanted = args.sessions.split(",")
        sessions = [dataset.get(sid) for sid in wanted]
    else:
        sessions = dataset.by_label(SessionLabel.NORMAL)
    variant = VARIANTS.get(args.variant)
    if variant is None:
        raise TlridsError(f"unknown variant {args.variant!r}")
    profile = train(sessions, variant, dataset.universe_size)
    out = Path(args.out)
    out.write_text(f"# dataset={ds_digest}\n" + profile.canonical())
    print(f"trained {args.variant} profile over {len(sessions)} sessions -> {out}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    config = _load_detector_config(args.config) if args.config else {}
    variant = args.variant or config.get("variant")
    if variant is None:
        raise TlridsError("detect needs --variant or a config file naming one")
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    exhaustive = args.exhaustive or config.get("exhaustive", False)
    param_pairs = list(config.get("param", [])) + list(args.param)

    dataset, ds_digest = _load_dataset(args.dataset)
    profile = TrainedProfile.load(args.profile)
    roster = read_roster(args.roster)
    scenario = None
    for sc in roster.scenarios:
        if sc.id == args.scenario:
            scenario = sc
            break
    if scenario is None:
        raise ScenarioError(f"no scenario {args.scenario!r} in {args.roster}")
    contaminated = set(scenario.session_ids) & set(profile.training_ids)
    if contaminated:
        print(
            f"warning: scenario shares {len(contaminated)} sessions with the "
            f"training set: {sorted(contaminated)}",
            file=sys.stderr,
        )
    params = _parse_params(param_pairs)
    detector = build_detector(
        profile,
        variant,
        params=params,
        seed=seed,
        exhaustive=exhaustive,
    )
    timeline = assemble_timeline(scenario, dataset)
    result = detector.run_scenario(
        timeline,
        record_populations=args.probe_log is not None,
        pacing=args.pacing,
    )
    out = _out_dir(args.out)
    header = (
        f"scenario={scenario.id}\nvariant={variant}\nseed={seed}\n"
        f"params={params.digest()}\ndataset={ds_digest}"
    )
    write_alert_log(result, out / "alerts.log", header=header)
    (out / "verdict.txt").write_text(
        "\n".join(f"# {h}" for h in header.splitlines())
        + f"\nverdict {result.verdict}\nalerts {len(result.alerts)}\n"
    )
    if args.probe_log is not None:
        write_probe_log(
            result, out / args.probe_log, detector.params.probe_interval_ticks,
            header=header,
        )
    print(f"{scenario.id}: {result.verdict} ({len(result.alerts)} alerts)")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    dataset, ds_digest = _load_dataset(args.dataset)
    params = _parse_params(args.param)
    systems = tuple(args.variants.split(","))
    config = BenchConfig(
        systems=systems,
        seed=args.seed,
        params=params,
        jobs=args.jobs,
        exhaustive=args.exhaustive,
    )
    outcome = run_bench(dataset, config)
    out = _out_dir(args.out)
    header = (
        f"benchmark report\nseed={args.seed}\nparams={params.digest()}\n"
        f"dataset={ds_digest}\nsystems={','.join(systems)}"
    )
    table = emit_table(outcome.report, header=header)
    (out / "report.txt").write_text(table)
    (out / "report.tsv").write_text(emit_machine(outcome.report, header=header))
    write_roster(outcome.roster, out / "roster.manifest", header=header)
    (out / "verdicts.tsv").write_text(
        "\n".join([f"# {h}" for h in header.splitlines()] + outcome.verdict_lines())
        + "\n"
    )
    print(table, end="")
    return 0


def cmd_scatter(args: argparse.Namespace) -> int:
    dataset, ds_digest = _load_dataset(args.dataset)
    text = emit_scatter(
        dataset.sessions, args.signal, header=f"signal={args.signal}\ndataset={ds_digest}"
    )
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote scatter data for {args.signal} -> {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlrids",
        description="Immune-inspired process anomaly detection toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normals", type=int, default=55)
    p.add_argument("--universe", type=int, default=None)
    p.add_argument("--overlap", type=float, default=None)
    p.add_argument("--profile-file", default=None,
                   help="key/value overrides for the synth profile")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a detector profile")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", required=True, choices=sorted(VARIANTS))
    p.add_argument("--sessions", default=None,
                   help="comma-separated session ids (default: all normal)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run one detector over one scenario")
    p.add_argument("--dataset", required=True)
    p.add_argument("--profile", required=True, help="trained profile file")
    p.add_argument("--variant", default=None, choices=sorted(VARIANTS))
    p.add_argument("--config", default=None,
                   help="detector config file (variant/seed/exhaustive/param "
                        "lines); explicit flags win")
    p.add_argument("--roster", required=True, help="roster manifest file")
    p.add_argument("--scenario", required=True, help="scenario id to replay")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--param", action="append", default=[],
                   help="tissue parameter override key=value (repeatable)")
    p.add_argument("--exhaustive", action="store_true",
                   help="deterministic full-coverage lock rotation")
    p.add_argument("--pacing", action="store_true",
                   help="replay in wall-clock time instead of virtual time")
    p.add_argument("--probe-log", default=None,
                   help="also write a population probe log with this file name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="run the benchmark roster")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variants", default=",".join(
        ("systrace", "negsel", "sig1", "sig2", "sig3", "tlr1", "tlr2", "tlr3")))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=0,
                   help="parallel scenario runs (0 = auto)")
    p.add_argument("--param", action="append", default=[],
                   help="tissue parameter override key=value (repeatable)")
    p.add_argument("--exhaustive", action="store_true",
                   help="full-coverage lock rotation for tissue systems")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scatter", help="emit signal scatter data")
    p.add_argument("--dataset", required=True)
    p.add_argument("--signal", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scatter)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TlridsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
