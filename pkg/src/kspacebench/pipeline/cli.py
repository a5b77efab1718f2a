"""Command line interface.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical failure.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace

from ..artifacts import CalibrationError, MotionEvent, motion_state_images
from ..core import ValidationError, fft2c, ifft2c
from ..phantom import MaskPair, brain_phantom_spec, estimate_foreground, generate_phantom
from ..recon import CascadeConfig, ReconDivergenceError, cascade_run, evaluate_external, \
    reference_image, zero_filled
from ..sampling import DEFAULT_ACS_FRACTIONS, MaskSpec, load_mask, make_mask, save_mask
from .config import load_config
from .experiment import DegradationSpec, NoiseSpec, degrade, phantom_subject, run_experiment
from .io import atomic_write, export_kcpx, export_pgm, import_kcpx, import_pgm

log = logging.getLogger("kspacebench")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def _out(args, name):
    return os.path.join(args.out_dir or ".", name)


def _mask_spec(args, lines):
    acs = args.acs_fraction
    if acs is None:
        acs = DEFAULT_ACS_FRACTIONS.get(args.acceleration)
    if acs is None:
        raise ValidationError("--acs-fraction is required for this acceleration")
    return MaskSpec(args.strategy, args.acceleration, acs, lines, seed=args.seed or 0)


def _parse_event(text):
    try:
        parts = [float(p) for p in text.split(":")]
        onset, rot, dx, dy = (parts + [0.0] * 4)[:4]
    except ValueError:
        raise argparse.ArgumentTypeError(f"motion event must be onset:rot:dx:dy, got {text!r}")
    return MotionEvent(onset, rot, (dx, dy))


def _load_kspace(path):
    x, domain = import_kcpx(path)
    return (x if domain == "kspace" else fft2c(x)), domain


def _masks_for(fg_path, ref):
    if fg_path:
        return MaskPair(import_pgm(fg_path) > 0.5)
    return estimate_foreground(ref)


def cmd_phantom(args):
    if args.seed is None:
        spec = brain_phantom_spec(args.size)
        img, masks = generate_phantom(spec)
        k = fft2c(img)
    else:
        subj = phantom_subject(0, args.seed, args.size, args.texture, args.baseline_snr)
        img, masks = generate_phantom(brain_phantom_spec(args.size, seed=subj.seed,
                                                         texture=args.texture))
        k = subj.k_full
    export_kcpx(img, _out(args, "phantom.kcpx"), "image")
    export_kcpx(k, _out(args, "kspace.kcpx"), "kspace")
    export_pgm(reference_image(img), _out(args, "phantom.pgm"))
    export_pgm(masks.foreground.astype(float), _out(args, "foreground.pgm"))
    log.info("phantom written to %s", args.out_dir or ".")


def cmd_mask(args):
    mask = make_mask(_mask_spec(args, args.lines))
    save_mask(mask, args.output or _out(args, "mask.txt"))
    log.info("mask: %d of %d lines kept", mask.count, len(mask))


def cmd_degrade(args):
    k, _ = _load_kspace(args.input)
    if args.mask_file:
        mask = load_mask(args.mask_file)
    elif args.strategy:
        mask = make_mask(_mask_spec(args, k.shape[0]))
    else:
        mask = None
    noise = None
    if args.noise_sigma is not None:
        noise = NoiseSpec(sigma=args.noise_sigma)
    elif args.noise_factor is not None:
        noise = NoiseSpec(snr_factor=args.noise_factor)
    ref = reference_image(ifft2c(k))
    masks = _masks_for(args.foreground, ref) if noise and noise.snr_factor else None
    spec = DegradationSpec(mask, noise, tuple(args.motion or ()), args.order, args.seed or 0)
    k_deg, mask = degrade(k, spec, masks)
    export_kcpx(k_deg, args.output or _out(args, "degraded.kcpx"), "kspace")
    save_mask(mask, args.mask_out or _out(args, "mask.txt"))
    if args.preview:
        for i, state in enumerate(motion_state_images(ifft2c(k), spec.motion)):
            export_pgm(reference_image(state), _out(args, f"motion_state{i:02d}.pgm"))


def cmd_recon(args):
    k, _ = _load_kspace(args.input)
    mask = load_mask(args.mask)
    if args.method == "zero_filled":
        image = zero_filled(k, mask)
    else:
        cfg = CascadeConfig(args.k_stage, args.i_stage, args.tv_lambda, args.tv_steps,
                            args.iterations, record_diagnostics=bool(args.diagnostics))
        res = cascade_run(k, mask, cfg)
        image = res.image
        if args.diagnostics:
            res.diagnostics_csv(args.diagnostics)
    export_kcpx(image, args.output or _out(args, "recon.kcpx"), "image")
    export_pgm(reference_image(image), args.pgm or _out(args, "recon.pgm"))


def _as_image(path):
    x, domain = import_kcpx(path)
    return x if domain == "image" else ifft2c(x)


def cmd_eval(args):
    if len(args.recon) != len(args.ref):
        raise ValidationError(f"{len(args.recon)} reconstructions but {len(args.ref)} references")
    recons = [_as_image(p) for p in args.recon]
    refs = [_as_image(p) for p in args.ref]
    fgs = args.foreground or [None] * len(refs)
    if len(fgs) != len(refs):
        raise ValidationError("need one --foreground per reference")
    masks = [_masks_for(f, reference_image(r)) for f, r in zip(fgs, refs)]
    ids = [os.path.splitext(os.path.basename(p))[0] for p in args.recon]
    report = evaluate_external(recons, refs, masks, ids)
    text = report.to_csv()
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    if not args.config:
        raise ValidationError("run needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = run_experiment(cfg, args.out_dir or cfg.out_dir)
    for t in out.trends:
        log.info(t.line())


def build_parser():
    p = argparse.ArgumentParser(prog="kspacebench", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--config", help="experiment TOML file (run)")
    p.add_argument("--out-dir", help="directory for outputs")
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="emit a phantom, its k-space and foreground mask")
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--texture", type=float, default=0.02)
    s.add_argument("--baseline-snr", type=float, default=40.0)
    s.set_defaults(func=cmd_phantom)

    def mask_args(s, required):
        s.add_argument("--strategy", choices=("gradient", "random", "uniform"),
                       required=required)
        s.add_argument("--acceleration", type=float, default=5.0)
        s.add_argument("--acs-fraction", type=float, default=None,
                       help="defaults to 0.25/0.10/0.04 for R=2/5/10")

    s = sub.add_parser("mask", help="emit a line mask file")
    mask_args(s, True)
    s.add_argument("--lines", type=int, default=256)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("degrade", help="add artifacts then under-sample a kcpx file")
    s.add_argument("input")
    mask_args(s, False)
    s.add_argument("--mask-file")
    s.add_argument("--noise-sigma", type=float)
    s.add_argument("--noise-factor", type=float, help="target SNR factor, e.g. 0.5")
    s.add_argument("--motion", type=_parse_event, action="append",
                   metavar="ONSET:ROT:DX:DY")
    s.add_argument("--order", choices=("linear", "centric"), default="linear")
    s.add_argument("--foreground", help="foreground PGM for noise calibration")
    s.add_argument("--preview", action="store_true",
                   help="write magnitude PGMs of every motion state")
    s.add_argument("-o", "--output")
    s.add_argument("--mask-out")
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("recon", help="reconstruct a degraded kcpx k-space")
    s.add_argument("input")
    s.add_argument("--mask", required=True)
    s.add_argument("--method", choices=("zero_filled", "cascade"), default="cascade")
    s.add_argument("--k-stage", choices=("zero_fill", "hermitian_fill"), default="hermitian_fill")
    s.add_argument("--i-stage", choices=("none", "tv", "real_positivity"), default="tv")
    s.add_argument("--tv-lambda", type=float, default=0.05)
    s.add_argument("--tv-steps", type=int, default=10)
    s.add_argument("--iterations", type=int, default=20)
    s.add_argument("--diagnostics", help="CSV path for per-iteration diagnostics")
    s.add_argument("-o", "--output")
    s.add_argument("--pgm")
    s.set_defaults(func=cmd_recon)

    s = sub.add_parser("eval", help="score reconstructions against references")
    s.add_argument("--recon", nargs="+", required=True)
    s.add_argument("--ref", nargs="+", required=True)
    s.add_argument("--foreground", nargs="+")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("run", help="run a full experiment from --config")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CalibrationError, ReconDivergenceError, FloatingPointError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:  # includes ValidationError
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
