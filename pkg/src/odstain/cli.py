"""Command-line interface.

Exit codes: 0 ok, 1 internal / io, 2 missing input, 3 malformed image or
tensor, 4 invalid parameter, 5 shape mismatch, 6 pairing mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from odstain import __version__
from odstain.core import PipelineConfig, load_config, load_npy, load_png, save_npy, save_png
from odstain.errors import InvalidParameter, IoFailure, OdstainError, ShapeMismatch
from odstain.fod import FodMap, downsample_mask, fod_map, heatmap, pseudo_mask
from odstain.metrics import (
    cumulative_iod_curve,
    curve_csv,
    dumps_json,
    evaluate_dataset,
    report_csv,
    report_json,
)
from odstain.mlpa import mlpa_total
from odstain.pcls import compute_prototypes, ctpc_from_prototypes
from odstain.stainsep import (
    DAB,
    DEFAULT_STAIN_MATRIX,
    HEMATOXYLIN,
    dab_image,
    od_transform,
    reconstruct_stain,
    separate,
    stain_matrix_from_values,
)

log = logging.getLogger("odstain")


@dataclass
class CommandOutcome:
    exit_code: int = 0
    report_path: Path | None = None
    diagnostics: list = field(default_factory=list)


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def _matrix(cfg):
    if cfg.stain_matrix is None:
        return DEFAULT_STAIN_MATRIX
    return stain_matrix_from_values(cfg.stain_matrix)


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    return cfg.replace(
        alpha=getattr(args, "alpha", None),
        beta=getattr(args, "beta", None),
        n_h=getattr(args, "n_h", None),
        n_b=getattr(args, "n_b", None),
        mask_tau=getattr(args, "mask_tau", None),
        pos_tau=getattr(args, "pos_tau", None),
        i0=getattr(args, "i0", None),
        force_alpha=True if getattr(args, "force", False) else None,
    )


def _load_fod(path, cfg, input_is_dab=False) -> FodMap:
    """A FOD map from a 2-D .npy file, or computed from an IHC PNG."""
    path = Path(path)
    if path.suffix.lower() == ".npy":
        values = load_npy(path)
        if values.ndim != 2:
            raise ShapeMismatch(f"{path}: FOD map must be 2-D, got shape {values.shape}")
        return FodMap(values.astype(np.float64), cfg.alpha)
    img = load_png(path)
    if not input_is_dab:
        img = dab_image(img, _matrix(cfg), cfg.i0)
    return fod_map(img, cfg.alpha, cfg.i0, force=cfg.force_alpha)


def cmd_separate(args) -> CommandOutcome:
    cfg = _config(args)
    m = _matrix(cfg)
    img = load_png(args.input)
    conc = separate(od_transform(img, cfg.i0), m)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc
    save_png(reconstruct_stain(conc, DAB, m, cfg.i0), out / "dab.png")
    save_png(reconstruct_stain(conc, HEMATOXYLIN, m, cfg.i0), out / "hematoxylin.png")
    save_npy(conc, out / "concentrations.npy")
    return CommandOutcome(0, out)


def cmd_fod(args) -> CommandOutcome:
    cfg = _config(args)
    o = _load_fod(args.input, cfg, args.input_is_dab)
    save_npy(o.values, args.out)
    if args.heatmap:
        save_png(heatmap(o), args.heatmap)
    return CommandOutcome(0, Path(args.out))


def _emit(payload, out) -> CommandOutcome:
    text = dumps_json(payload)
    if out is None:
        sys.stdout.write(text)
        return CommandOutcome(0)
    return CommandOutcome(0, _write_text(out, text))


def cmd_mlpa(args) -> CommandOutcome:
    cfg = _config(args)
    o_f = _load_fod(args.fake, cfg, args.input_is_dab)
    o_r = _load_fod(args.real, cfg, args.input_is_dab)
    payload = mlpa_total(o_f, o_r, cfg).to_dict()
    payload["config"] = cfg.to_dict()
    return _emit(payload, args.out)


def _mask(path, name):
    m = load_npy(path)
    if m.ndim != 3:
        raise ShapeMismatch(f"{name} {path} must be (H, W, C), got shape {m.shape}")
    return m


def cmd_ctpc(args) -> CommandOutcome:
    cfg = _config(args)
    f_f, p_f = load_npy(args.fake_feat), load_npy(args.fake_prob)
    f_r, p_r = load_npy(args.real_feat), load_npy(args.real_prob)
    for name, t in [("fake features", f_f), ("fake probabilities", p_f),
                    ("real features", f_r), ("real probabilities", p_r)]:
        if t.ndim != 3:
            raise ShapeMismatch(f"{name} must be (H, W, K), got shape {t.shape}")
    if args.mask_from_fod:
        h2, w2 = f_f.shape[:2]
        fake_src, real_src = args.mask_from_fod
        m_f = downsample_mask(pseudo_mask(_load_fod(fake_src, cfg), cfg.mask_tau), h2, w2)
        h2, w2 = f_r.shape[:2]
        m_r = downsample_mask(pseudo_mask(_load_fod(real_src, cfg), cfg.mask_tau), h2, w2)
    elif args.fake_mask and args.real_mask:
        m_f = _mask(args.fake_mask, "fake mask")
        m_r = _mask(args.real_mask, "real mask")
    else:
        raise InvalidParameter("give --fake-mask and --real-mask, or --mask-from-fod FAKE REAL")
    q_f = compute_prototypes(f_f, p_f)
    q_r = compute_prototypes(f_r, p_r)
    if q_f.shape != q_r.shape:
        raise ShapeMismatch(f"fake/real prototypes differ: {q_f.shape} vs {q_r.shape}")
    loss = ctpc_from_prototypes(f_f, q_r, f_r, q_f, m_f, m_r)
    payload = {
        "ctpc": loss,
        "prototypes_fake": q_f.tolist(),
        "prototypes_real": q_r.tolist(),
        "config": cfg.to_dict(),
    }
    return _emit(payload, args.out)


def cmd_eval(args) -> CommandOutcome:
    cfg = _config(args)
    if args.jobs < 1:
        raise InvalidParameter(f"--jobs must be >= 1, got {args.jobs}")
    report = evaluate_dataset(args.fake_dir, args.real_dir, cfg, jobs=args.jobs)
    out = Path(args.out)
    path = _write_text(out / "report.json", report_json(report, cfg.to_dict()))
    _write_text(out / "report.csv", report_csv(report))
    _write_text(out / "cumulative_iod.csv", curve_csv(cumulative_iod_curve(report)))
    diagnostics = []
    if report.pearson_r is None:
        diagnostics.append("warning: Pearson-R undefined (fewer than 2 pairs or constant IOD)")
    return CommandOutcome(0, path, diagnostics)


def cmd_synth(args) -> CommandOutcome:
    from odstain.synth import write_corpus

    write_corpus(args.out, args.n, args.size, args.seed)
    return CommandOutcome(0, Path(args.out))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odstain",
        description="DAB stain separation, focal OD maps, MLPA/CTPC losses and IHC metrics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--config", help="flat JSON config (default: $ODSTAIN_CONFIG)")
        p.add_argument("--i0", type=float, help="incident intensity (default 255)")
        return p

    p = add("separate", cmd_separate, "colour deconvolution into DAB/hematoxylin renderings")
    p.add_argument("input")
    p.add_argument("out_dir")

    def fod_opts(p):
        p.add_argument("--alpha", type=float, help="focusing exponent (default 1.8)")
        p.add_argument("--force", action="store_true", help="accept alpha <= 1")
        p.add_argument("--input-is-dab", action="store_true",
                       help="PNG inputs are already DAB renderings")

    p = add("fod", cmd_fod, "focal optical density map of an IHC image")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output .npy path")
    p.add_argument("--heatmap", help="optional 8-bit PNG rendering")
    fod_opts(p)

    p = add("mlpa", cmd_mlpa, "MLPA loss between a fake and a real image (PNG or FOD .npy)")
    p.add_argument("fake")
    p.add_argument("real")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--beta", type=float)
    p.add_argument("--n-h", dest="n_h", type=int)
    p.add_argument("--n-b", dest="n_b", type=int)
    fod_opts(p)

    p = add("ctpc", cmd_ctpc, "prototype consistency loss from feature/probability tensors")
    for flag in ("--fake-feat", "--fake-prob", "--real-feat", "--real-prob"):
        p.add_argument(flag, required=True)
    p.add_argument("--fake-mask")
    p.add_argument("--real-mask")
    p.add_argument("--mask-from-fod", nargs=2, metavar=("FAKE", "REAL"),
                   help="derive masks by thresholding the FOD of these images")
    p.add_argument("--mask-tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", help="JSON output path (default: stdout)")

    p = add("eval", cmd_eval, "paired dataset evaluation")
    p.add_argument("--fake-dir", required=True)
    p.add_argument("--real-dir", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--pos-tau", type=float)

    p = sub.add_parser("synth", help="write a synthetic paired corpus")
    p.set_defaults(func=cmd_synth)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    return parser


def run(argv=None) -> CommandOutcome:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except OdstainError as exc:
        return CommandOutcome(exc.exit_code, None, [f"error: {exc}"])
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        return CommandOutcome(1, None, [f"internal error: {exc!r}"])


def main(argv=None) -> int:
    outcome = run(argv)
    for line in outcome.diagnostics:
        print(line, file=sys.stderr)
    if outcome.exit_code == 0 and outcome.report_path is not None:
        print(outcome.report_path)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
