"""Command-line interface: every pipeline stage as one subcommand.

Exit codes: 0 success, 1 usage error, 2 data error. Data errors emit one
machine-readable line on stderr: ``ERROR <code> <case_id> <message>``
(``-`` when no case id applies). All randomness sits behind ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import metrics, pipeline, synthetic
from .errors import CxrError, InputError
from .lungmask import split_mask
from .manifest import load_manifest
from .pgm import read_mask, read_pgm, write_mask, write_pgm
from .registration import (
    CoordMap,
    export_pseudo_pairs,
    read_coord_map,
    reg,
    warp,
    write_coord_map,
)
from .relcoords import oracle_register

ORACLE_SIZE_CAP = 64


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _tau_list(text: str) -> list[float]:
    try:
        taus = [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tau list {text!r}")
    if not taus or any(t < 0 for t in taus):
        raise argparse.ArgumentTypeError("tau list must be non-empty and non-negative")
    return taus


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cxranomaly", description="Lung registration and anomaly scoring pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synthetic", help="Generate a synthetic dataset (images, masks, manifest)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--lesion-rate", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("split-mask", help="Split a whole-lung mask into left/right components")
    p.add_argument("--mask", required=True)
    p.add_argument("--out-left", required=True)
    p.add_argument("--out-right", required=True)

    p = sub.add_parser("register", help="Compute forward/inverse coordinate maps for a mask pair")
    p.add_argument("--moving-mask", required=True)
    p.add_argument("--fixed-mask", required=True)
    p.add_argument("--out-pair", required=True)

    p = sub.add_parser("oracle-register", help="Brute-force reference registration (small masks only)")
    p.add_argument("--moving-mask", required=True)
    p.add_argument("--fixed-mask", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("warp", help="Resample an image through a coordinate map")
    p.add_argument("--image", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nearest", action="store_true")

    p = sub.add_parser("augment", help="Bilateral augmentation of registered side images")
    p.add_argument("--case-dir", required=True)
    p.add_argument("--fixed-mask", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("prepare", help="Build the fixed-frame training dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fixed-mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None, help="worker pool size (default: CPU count)")

    p = sub.add_parser("export-dlpr", help="Export (moving, pseudo-fixed) training pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fixed-mask", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run-test", help="Register/translate/deregister and score a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fixed-mask", required=True)
    p.add_argument("--backend", choices=pipeline.BACKEND_KINDS, required=True)
    p.add_argument("--template-l")
    p.add_argument("--template-r")
    p.add_argument("--cmd", help="external command template with {in} and {out}")
    p.add_argument("--tau", type=_tau_list, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None, help="worker pool size (default: CPU count)")
    p.add_argument("--timeout", type=float, default=pipeline.DEFAULT_TIMEOUT)

    p = sub.add_parser("eval", help="Summarize a score report (AUC, mean localization scores)")
    p.add_argument("--report", required=True)
    return parser


def _cmd_gen_synthetic(args) -> None:
    manifest, fixed, template = synthetic.generate_dataset(
        args.out, args.seed, args.count, args.lesion_rate
    )
    print(f"wrote {manifest} {fixed} {template}")


def _cmd_split_mask(args) -> None:
    pair = split_mask(read_mask(args.mask))
    write_mask(pair.left, args.out_left)
    write_mask(pair.right, args.out_right)


def _cmd_register(args) -> None:
    moving = read_mask(args.moving_mask)
    fixed = read_mask(args.fixed_mask)
    pair = reg(moving, fixed)
    out = Path(args.out_pair)
    out.mkdir(parents=True, exist_ok=True)
    write_coord_map(pair.forward, out / "forward.cmap")
    write_coord_map(pair.inverse, out / "inverse.cmap")
    print(f"wrote {out / 'forward.cmap'} {out / 'inverse.cmap'}")


def _cmd_oracle_register(args) -> None:
    moving = read_mask(args.moving_mask)
    fixed = read_mask(args.fixed_mask)
    for name, mask in (("moving", moving), ("fixed", fixed)):
        if max(mask.shape) > ORACLE_SIZE_CAP:
            print(
                f"cxranomaly oracle-register: error: {name} mask {mask.shape} exceeds "
                f"the {ORACLE_SIZE_CAP}x{ORACLE_SIZE_CAP} size cap",
                file=sys.stderr,
            )
            sys.exit(1)
    result = oracle_register(moving, fixed)
    coords = np.full((*moving.shape, 2), np.nan, dtype=np.float32)
    coords[result.moving_points[:, 0], result.moving_points[:, 1]] = result.fixed_points.astype(
        np.float32
    )
    cmap = CoordMap(
        moving.shape[0], moving.shape[1], fixed.shape[0], fixed.shape[1], coords, {"kind": "oracle"}
    )
    write_coord_map(cmap, args.out)
    print(f"wrote {args.out}")


def _cmd_warp(args) -> None:
    img = read_pgm(args.image)
    cmap = read_coord_map(args.map)
    write_pgm(warp(img, cmap, nearest=args.nearest), args.out)


def _cmd_augment(args) -> None:
    from .augment import ba_l_to_r, ba_r_to_l

    fixed = split_mask(read_mask(args.fixed_mask))
    case_dir = Path(args.case_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["case_id\tside\taugmented\tpath"]
    case_ids = sorted(p.name[: -len("_l_reg.pgm")] for p in case_dir.glob("*_l_reg.pgm"))
    if not case_ids:
        raise InputError(f"no *_l_reg.pgm files found in {case_dir}")
    for case_id in case_ids:
        right_path = case_dir / f"{case_id}_r_reg.pgm"
        if not right_path.is_file():
            raise InputError(f"missing {right_path} for case {case_id}", case_id)
        left_img = read_pgm(case_dir / f"{case_id}_l_reg.pgm")
        right_img = read_pgm(right_path)
        aug_left = ba_r_to_l(right_img, fixed.left, fixed.right)
        aug_right = ba_l_to_r(left_img, fixed.right, fixed.left)
        for side, image in (("l", aug_left), ("r", aug_right)):
            name = f"{case_id}_{side}_aug.pgm"
            write_pgm(image, out / name)
            lines.append(f"{case_id}\t{side}\ttrue\t{name}")
    (out / "augment_manifest.tsv").write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    print(f"augmented {len(case_ids)} case(s) into {out}")


def _cmd_prepare(args) -> None:
    cases = load_manifest(args.manifest)
    fixed_mask = read_mask(args.fixed_mask)
    ds = pipeline.prepare(cases, fixed_mask, args.out, jobs=args.jobs)
    print(
        f"Xr={len(ds.x_right)} Xl={len(ds.x_left)} Yr={len(ds.y_right)} Yl={len(ds.y_left)}"
        f" skipped={len(ds.skipped)}"
    )


def _cmd_export_dlpr(args) -> None:
    cases = load_manifest(args.manifest)
    fixed_mask = read_mask(args.fixed_mask)
    records = export_pseudo_pairs(cases, fixed_mask, args.out)
    ok = sum(1 for r in records if r["status"] == "ok")
    print(f"exported {ok} pair(s), {len(records) - ok} skipped")


def _cmd_run_test(args) -> None:
    cases = load_manifest(args.manifest)
    fixed_mask = read_mask(args.fixed_mask)
    out = Path(args.out)
    backend = pipeline.BackendSpec(
        kind=args.backend,
        template_left=Path(args.template_l) if args.template_l else None,
        template_right=Path(args.template_r) if args.template_r else None,
        command=args.cmd,
        exchange_dir=out / "exchange" if args.backend == "external" else None,
        timeout=args.timeout,
    ).validate()
    result = pipeline.eval_dataset(cases, fixed_mask, backend, args.tau, out, jobs=args.jobs)
    print(f"wrote {result['report']}")


def _cmd_eval(args) -> None:
    rows = metrics.read_report(args.report)
    if not rows:
        raise InputError(f"report {args.report} contains no score rows")
    for tau, s in metrics.summarize(rows).items():
        print(
            f"tau={tau:g} auc={s['auc']:.6f} mean_s_intensity={s['mean_s_intensity']:.3f}"
            f" mean_s_binary={s['mean_s_binary']:.3f}"
            f" n_normal={s['n_normal']} n_abnormal={s['n_abnormal']}"
        )


_COMMANDS = {
    "gen-synthetic": _cmd_gen_synthetic,
    "split-mask": _cmd_split_mask,
    "register": _cmd_register,
    "oracle-register": _cmd_oracle_register,
    "warp": _cmd_warp,
    "augment": _cmd_augment,
    "prepare": _cmd_prepare,
    "export-dlpr": _cmd_export_dlpr,
    "run-test": _cmd_run_test,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except CxrError as exc:
        print(f"ERROR {exc.code} {exc.case_id or '-'} {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ERROR IO - {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
