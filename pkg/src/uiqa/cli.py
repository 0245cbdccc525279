"""``uiqa`` command-line entry point.

Options are resolved with precedence flags > config file > defaults. The
config file is TOML; top-level keys apply to every subcommand and a table
named after the subcommand overrides them::

    seed = 7
    [distort]
    feather = 3
    [distort.levels]
    motion_blur = 4
    contrast = 4

Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from .errors import DataError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("uiqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


DEFAULTS: dict[str, dict[str, Any]] = {
    "synth": {"n_refs": 20, "size": 64, "non_targets": 0, "seed": 0},
    "distort": {"seed": 0, "boxes": None, "feather": 2.0, "levels": None},
    "mos": {"ratings": None, "simulate": False, "manifest": None, "subjects": 21, "seed": 0,
            "noise": 0.45, "verification": 5},
    "agreement": {},
    "screen": {"max_diff": 2, "max_fluctuations": None},
    "score": {"metrics": "psnr,ssim,uciqe,uiqm", "include_references": False},
    "split": {"scheme": "kfold", "k": 10, "ratio": 0.8, "seed": 0},
    "evaluate": {"c0_mode": "sign", "theta": 0.95, "c0_per_type": None, "manifest": None,
                 "seed": 0},
    "nontarget": {"threshold": 40.0, "model": None},
    "report": {"bins": 10},
}

REQUIRED: dict[str, tuple[str, ...]] = {
    "synth": (),
    "distort": ("refs",),
    "mos": (),
    "agreement": ("ratings",),
    "screen": ("ratings",),
    "score": ("manifest",),
    "split": ("manifest",),
    "evaluate": ("scores", "mos", "splits"),
    "nontarget": ("scores", "manifest"),
    "report": ("scores", "mos"),
}


def _build_parser() -> _Parser:
    p = _Parser(prog="uiqa", description=__doc__.split("\n", 1)[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    S = argparse.SUPPRESS

    def cmd(name: str, help: str) -> argparse.ArgumentParser:
        c = sub.add_parser(name, help=help, argument_default=S)
        c.add_argument("--out", required=True, help="output directory")
        c.add_argument("--config", help="TOML config file")
        return c

    c = cmd("synth", "write procedural reference scenes")
    c.add_argument("--n-refs", dest="n_refs", type=int)
    c.add_argument("--size", type=int)
    c.add_argument("--non-targets", dest="non_targets", type=int)
    c.add_argument("--seed", type=int)

    c = cmd("distort", "generate the distorted dataset")
    c.add_argument("--refs")
    c.add_argument("--boxes")
    c.add_argument("--seed", type=int)
    c.add_argument("--feather", type=float)

    c = cmd("mos", "compute MOS labels")
    c.add_argument("--ratings")
    c.add_argument("--simulate", action="store_true")
    c.add_argument("--manifest")
    c.add_argument("--subjects", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--noise", type=float)
    c.add_argument("--verification", type=int, help="images presented twice per subject")

    c = cmd("agreement", "outlier coefficient and rater agreement")
    c.add_argument("--ratings")

    c = cmd("screen", "verification-set subject screening")
    c.add_argument("--ratings")
    c.add_argument("--max-diff", dest="max_diff", type=int)
    c.add_argument("--max-fluctuations", dest="max_fluctuations", type=float)

    c = cmd("score", "score a manifest with classical metrics")
    c.add_argument("--manifest")
    c.add_argument("--metrics")
    c.add_argument("--include-references", dest="include_references", action="store_true")

    c = cmd("split", "content-disjoint splits")
    c.add_argument("--manifest")
    c.add_argument("--scheme", choices=["kfold", "holdout"])
    c.add_argument("--k", type=int)
    c.add_argument("--ratio", type=float)
    c.add_argument("--seed", type=int)

    c = cmd("evaluate", "correlations, C0 and significance matrix")
    c.add_argument("--scores", help="comma-separated score CSVs")
    c.add_argument("--mos")
    c.add_argument("--splits")
    c.add_argument("--manifest")
    c.add_argument("--c0-mode", dest="c0_mode", choices=["sign", "threshold"])
    c.add_argument("--theta", type=float)
    c.add_argument("--c0-per-type", dest="c0_per_type", type=int)
    c.add_argument("--seed", type=int)

    c = cmd("nontarget", "share of non-target images scored below a threshold")
    c.add_argument("--scores")
    c.add_argument("--manifest")
    c.add_argument("--threshold", type=float)
    c.add_argument("--model")

    c = cmd("report", "scatter and MOS-histogram series (CSV + SVG)")
    c.add_argument("--scores", help="comma-separated score CSVs")
    c.add_argument("--mos")
    c.add_argument("--bins", type=int)
    return p


def _load_config(path: Optional[str], command: str) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc
    merged = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    merged.update(raw.get(command, {}))
    return {k.replace("-", "_"): v for k, v in merged.items()}


def resolve_config(command: str, flags: dict[str, Any]) -> dict[str, Any]:
    cfg = dict(DEFAULTS[command])
    cfg.update(_load_config(flags.get("config"), command))
    cfg.update({k: v for k, v in flags.items() if k not in ("command", "verbose")})
    missing = [k for k in REQUIRED[command] if not cfg.get(k)]
    if command == "mos" and not cfg.get("ratings") and not (cfg.get("simulate") and cfg.get("manifest")):
        missing.append("ratings (or --simulate --manifest)")
    if missing:
        raise UsageError(f"{command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    return cfg


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _split_list(value: str | Sequence[str]) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _read_score_files(value: str | Sequence[str]):
    from .metrics import read_scores

    tables = []
    for path in _split_list(value):
        tables.extend(read_scores(path))
    return tables


def run_synth(cfg: dict[str, Any], out: Path) -> None:
    from .synthetic import write_reference_set

    write_reference_set(out, int(cfg["n_refs"]), int(cfg["seed"]), int(cfg["size"]),
                        int(cfg["non_targets"]))


def run_distort(cfg: dict[str, Any], out: Path) -> None:
    from .distortions import DistortionConfig, DistortionKind, generate_distorted_set
    from .manifest import read_manifest, write_manifest

    refs = read_manifest(cfg["refs"])
    boxes = None
    if cfg.get("boxes"):
        boxes = json.loads(Path(cfg["boxes"]).read_text(encoding="utf-8"))
    config = DistortionConfig.from_mapping({"feather": cfg["feather"], "levels": cfg["levels"]})
    if boxes is None and cfg["levels"] is None:
        # fg_bg needs boxes; without them the default table drops that kind
        config.levels.pop(DistortionKind.FG_BG, None)
        log.warning("no --boxes given; fg_bg distortions skipped")
    manifest = generate_distorted_set(refs, out, config, int(cfg["seed"]), boxes)
    write_manifest(manifest, out / "manifest.json")
    cfg["resolved_levels"] = config.to_json()


def run_mos(cfg: dict[str, Any], out: Path) -> None:
    from .manifest import read_manifest
    from .subjective import compute_mos, read_ratings, write_mos, write_ratings
    from .synthetic import simulate_ratings

    if cfg.get("ratings"):
        ratings = read_ratings(cfg["ratings"])
    else:
        ratings = simulate_ratings(read_manifest(cfg["manifest"]), int(cfg["subjects"]),
                                   int(cfg["seed"]), float(cfg["noise"]),
                                   n_verification=int(cfg["verification"]))
        write_ratings(ratings, out / "ratings.csv")
    write_mos(compute_mos(ratings), out / "mos.csv")


def run_agreement(cfg: dict[str, Any], out: Path) -> None:
    from .subjective import rater_agreement, read_ratings

    _write_json(out / "agreement.json", rater_agreement(read_ratings(cfg["ratings"])).to_json())


def run_screen(cfg: dict[str, Any], out: Path) -> None:
    import csv

    from .subjective import read_ratings, screen_subjects

    decisions = screen_subjects(read_ratings(cfg["ratings"]), int(cfg["max_diff"]),
                                cfg["max_fluctuations"])
    with (out / "screening.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "fluctuations", "n_verification", "keep"])
        for d in decisions.values():
            w.writerow([d.subject_id, d.fluctuations, d.n_verification, int(d.keep)])


def run_score(cfg: dict[str, Any], out: Path) -> None:
    from .manifest import read_manifest
    from .metrics import score_batch, write_scores, write_timing

    tables = score_batch(read_manifest(cfg["manifest"]), _split_list(cfg["metrics"]),
                         bool(cfg["include_references"]))
    for t in tables:
        write_scores([t], out / f"scores_{t.model_name}.csv")
    write_timing(tables, out / "timing.csv")


def run_split(cfg: dict[str, Any], out: Path) -> None:
    from .evaluation import make_splits, write_splits
    from .manifest import read_manifest

    plan = make_splits(read_manifest(cfg["manifest"]), cfg["scheme"], int(cfg["k"]),
                       float(cfg["ratio"]), int(cfg["seed"]))
    write_splits(plan, out / "splits.json")


def run_evaluate(cfg: dict[str, Any], out: Path) -> None:
    from .evaluation import evaluate, read_splits, write_report
    from .manifest import read_manifest
    from .subjective import read_mos

    manifest = read_manifest(cfg["manifest"]) if cfg.get("manifest") else None
    report = evaluate(_read_score_files(cfg["scores"]), read_mos(cfg["mos"]),
                      read_splits(cfg["splits"]), cfg["c0_mode"], float(cfg["theta"]),
                      cfg["c0_per_type"], manifest, int(cfg["seed"]))
    write_report(report, out)


def run_nontarget(cfg: dict[str, Any], out: Path) -> None:
    from .evaluation import nontarget_report
    from .manifest import read_manifest

    tables = _read_score_files(cfg["scores"])
    if cfg.get("model"):
        tables = [t for t in tables if t.model_name == cfg["model"]]
    if len(tables) != 1:
        raise DataError(f"expected exactly one model in the score files, found {len(tables)}; "
                        "use --model")
    rep = nontarget_report(tables[0], read_manifest(cfg["manifest"]), float(cfg["threshold"]))
    _write_json(out / "nontarget.json", {"model": tables[0].model_name, **rep.to_json()})


def run_report(cfg: dict[str, Any], out: Path) -> None:
    from .plots import write_figures
    from .subjective import read_mos

    write_figures(_read_score_files(cfg["scores"]), read_mos(cfg["mos"]), out, int(cfg["bins"]))


HANDLERS: dict[str, Callable[[dict[str, Any], Path], None]] = {
    "synth": run_synth,
    "distort": run_distort,
    "mos": run_mos,
    "agreement": run_agreement,
    "screen": run_screen,
    "score": run_score,
    "split": run_split,
    "evaluate": run_evaluate,
    "nontarget": run_nontarget,
    "report": run_report,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = vars(parser.parse_args(argv))
        command = args.get("command")
        if not command:
            raise UsageError("uiqa: a subcommand is required\n" + parser.format_usage())
        logging.basicConfig(level=logging.INFO if args.get("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(command, args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[command](cfg, out)
        _write_json(out / f"config.{command}.json",
                    {"command": command, **{k: v for k, v in sorted(cfg.items()) if k != "out"}})
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
