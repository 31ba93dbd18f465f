"""CLI entry point for the radix-X crossbar simulator."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError
from tqdm import tqdm

from .analog import decode_output, simulate_mvm
from .config import (
    MEASURED_PEAK_COLUMN_CURRENT_A,
    MEASURED_PEAK_DEVICE_CURRENT_A,
    CircuitParams,
    DeviceModel,
    RadixConfig,
    RunConfig,
)
from .conv import convolve_crossbar, pixels_to_activations, reference_convolve
from .cost import compare_schemes, reports_to_csv, reports_to_table
from .crossbar import program_crossbar
from .datasets import downsample_8x8, load_mnist_subset, read_idx, write_output_image
from .errors import FormatError, RadixXbarError
from .models import ConvReport, QuantizedTensor, trace_to_csv
from .quantizer import level_histogram, quantize_weights
from .tensor_io import read_tensor, write_tensor
from .trainer import TinyNet, train


def _status(args: argparse.Namespace, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _circuit(args: argparse.Namespace) -> CircuitParams:
    dev = DeviceModel(
        r_m=args.rm,
        v_th=args.vth,
        sigma_g=args.sigma,
        hrs_ratio=args.hrs_ratio,
        hrs_leak=args.hrs_leak,
    )
    return CircuitParams(dev=dev, r_fb=args.rfb, s=args.s)


def cmd_quantize(args: argparse.Namespace) -> int:
    """Quantize an f64 tensor to radix-X integers."""
    RunConfig(command="quantize", inputs=[args.input], output=args.out, quiet=args.quiet)
    cfg = RadixConfig(x=args.radix)
    weights = read_tensor(args.input, expect="f64")
    q = quantize_weights(weights, cfg, mode=args.mode)
    write_tensor(args.out, q.values.astype(np.int32))
    print("level,count")
    for level, count in level_histogram(q).items():
        print(f"{level},{count}")
    _status(args, f"✅ Quantized {q.values.size} weights to radix-{cfg.x}: {args.out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    """Read integer inputs through a programmed array, one pulse per row."""
    run = RunConfig(command="simulate", seed=args.seed, inputs=[args.weights, args.inputs], quiet=args.quiet)
    cfg = RadixConfig(x=args.radix)
    params = _circuit(args)
    weights = read_tensor(args.weights, expect="i32")
    inputs = read_tensor(args.inputs, expect="i32")
    if weights.ndim != 2:
        raise FormatError(f"weights must be an n x m tensor, got shape {weights.shape}")
    if inputs.ndim not in (1, 2):
        raise FormatError(f"inputs must be (n,) or (pulses, n), got shape {inputs.shape}")
    pulses = np.atleast_2d(inputs)

    w_q = QuantizedTensor(weights, cfg.w_min_q, cfg.w_max_q)
    x = QuantizedTensor(pulses, 0, cfg.a_max)
    program = program_crossbar(w_q, cfg)
    noise_seed = run.seed if params.dev.sigma_g > 0 else None
    readout = simulate_mvm(program, x, params, noise_seed)
    decoded = decode_output(readout, params)
    for k in range(len(pulses)):
        print(f"# pulse {k}")
        sys.stdout.write(readout.pulse(k).to_csv(decoded[k]))
    _status(args, f"✅ Simulated {len(pulses)} pulse(s) on a {program.n}x{program.m} array")
    return 0


def cmd_convolve(args: argparse.Namespace) -> int:
    """Convolve IDX images with a kernel through the crossbar."""
    run = RunConfig(command="convolve", seed=args.seed, inputs=[args.idx, args.kernel],
                    output=args.outdir, quiet=args.quiet)
    params = _circuit(args)
    kernel = read_tensor(args.kernel, expect="i32")
    images = read_idx(args.idx)
    if images.ndim != 3:
        raise FormatError(f"{args.idx} is not an IDX image file")
    cfg = RadixConfig(x=args.radix)
    kernel_q = QuantizedTensor(kernel, cfg.w_min_q, cfg.w_max_q)
    images = images[:args.count]
    noise_seed = run.seed if params.dev.sigma_g > 0 else None
    args.outdir.mkdir(parents=True, exist_ok=True)

    total = ConvReport()
    matches = 0
    rows = ["image,max_i_tot_A,max_i_ref_A,max_device_A,cycles,exact_match"]
    for i, img in enumerate(tqdm(images, desc="convolve", disable=args.quiet)):
        out, plan, report = convolve_crossbar(
            img, kernel_q, params, noise_seed,
            tile_rows=args.tile_rows, columns=args.columns, flip=args.flip,
        )
        oracle = reference_convolve(pixels_to_activations(img, cfg).values, kernel, flip=args.flip)
        exact = bool(np.array_equal(out, oracle))
        matches += exact
        total = total.merge(report)
        write_output_image(args.outdir / f"image_{i:04d}.pgm", out)
        rows.append(
            f"{i},{report.peak_column_current_a:.6e},{report.peak_reference_current_a:.6e},"
            f"{report.peak_device_current_a:.6e},{plan.cycles},{str(exact).lower()}"
        )
    (args.outdir / "summary.csv").write_text("\n".join(rows) + "\n")
    (args.outdir / "report.json").write_text(total.to_json() + "\n")

    print(f"images,{len(images)}")
    print(f"exact_matches,{matches}")
    print(f"peak_i_tot_A,{total.peak_column_current_a:.6e}")
    print(f"peak_device_A,{total.peak_device_current_a:.6e}")
    print(f"reference_i_tot_A,{MEASURED_PEAK_COLUMN_CURRENT_A:.6e}")
    print(f"reference_device_A,{MEASURED_PEAK_DEVICE_CURRENT_A:.6e}")
    print(f"column_within_band,{str(total.column_within_band).lower()}")
    print(f"device_within_band,{str(total.device_within_band).lower()}")
    print(f"device_vs_column_reference,{str(total.device_vs_column_reference).lower()}")
    _status(args, f"✅ Wrote {len(images)} images to {args.outdir}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Train TinyNet on an IDX image/label pair."""
    images_path, labels_path = args.dataset
    run = RunConfig(command="train", seed=args.seed, inputs=[images_path, labels_path],
                    output=args.out, quiet=args.quiet)
    images, labels = load_mnist_subset(images_path, labels_path, args.count)
    if args.size == 8:
        images = downsample_8x8(images)
    cfg = RadixConfig(x=args.radix)
    modes = ["real", "bnn", "radix"] if args.mode == "all" else [args.mode]

    trace = []
    for mode in modes:
        net = TinyNet.for_mode(
            mode,
            quantize_activations=not args.real_activations,
            input_shape=images.shape[1:],
            cfg=cfg,
        )
        _status(args, f"📦 Training {mode} for {args.epochs} epochs on {len(images)} samples")
        state, rows = train(
            net, (images, labels), args.epochs, run.seed,
            batch_size=args.batch_size, lr=args.lr, progress=not args.quiet,
        )
        out = args.out if len(modes) == 1 else args.out.with_name(f"{args.out.stem}_{mode}{args.out.suffix}")
        state.save(out)
        trace.extend(rows)
        _status(args, f"✅ {mode}: val_acc={rows[-1].val_acc:.4f}, checkpoint {out}")

    trace_path = args.trace or args.out.with_suffix(".csv")
    trace_path.write_text(trace_to_csv(trace))
    sys.stdout.write(trace_to_csv(trace))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    """Print the column/device comparison table."""
    cfg = RadixConfig(x=args.radix)
    reports = compare_schemes(args.rows, args.cols, cfg, bits=args.bits)
    if args.csv:
        sys.stdout.write(reports_to_csv(reports))
    else:
        sys.stdout.write(reports_to_table(reports, cfg, args.bits))
    return 0


def _add_circuit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--radix", type=int, default=5, help="Radix X (default: 5)")
    parser.add_argument("--rm", type=float, default=100e3, help="LRS resistance in ohms (default: 100e3)")
    parser.add_argument("--rfb", type=float, default=10.0, help="Feedback resistance in ohms (default: 10)")
    parser.add_argument("--s", type=float, default=10.0, help="Input voltage scaling factor (default: 10)")
    parser.add_argument("--vth", type=float, default=0.5, help="Switching threshold in volts (default: 0.5)")
    parser.add_argument("--sigma", type=float, default=0.0, help="Relative conductance spread (default: 0)")
    parser.add_argument("--hrs-ratio", type=float, default=100.0, help="R_off/R_on (default: 100)")
    parser.add_argument("--hrs-leak", action="store_true", help="Model idle devices at HRS instead of open")
    parser.add_argument("--seed", type=int, default=0, help="Noise seed (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Radix-X memristor crossbar CNN accelerator simulator",
        prog="radix-xbar",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="Quantize an f64 RXT1 tensor to radix-X")
    p.add_argument("--in", dest="input", type=Path, required=True, help="Input f64 tensor")
    p.add_argument("--radix", type=int, default=5, help="Radix X (default: 5)")
    p.add_argument("--out", type=Path, required=True, help="Output i32 tensor")
    p.add_argument("--mode", choices=["eq7", "alg1"], default="eq7", help="Binning rule (default: eq7)")
    p.set_defaults(handler=cmd_quantize)

    p = sub.add_parser("simulate", help="Simulate matrix-vector reads on the crossbar")
    p.add_argument("--weights", type=Path, required=True, help="n x m i32 weight tensor")
    p.add_argument("--inputs", type=Path, required=True, help="(n,) or (pulses, n) i32 activations")
    _add_circuit_flags(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("convolve", help="Convolve IDX images on the crossbar")
    p.add_argument("--idx", type=Path, required=True, help="IDX image file")
    p.add_argument("--kernel", type=Path, required=True, help="i32 kernel tensor")
    p.add_argument("--count", type=int, default=100, help="Number of images (default: 100)")
    p.add_argument("--outdir", type=Path, required=True, help="Output directory")
    p.add_argument("--tile-rows", type=int, default=None, help="Array rows per read (default: whole kernel)")
    p.add_argument("--columns", type=int, default=None, help="Patches per read cycle (default: all)")
    p.add_argument("--flip", action="store_true", help="Flip the kernel (true convolution)")
    _add_circuit_flags(p)
    p.set_defaults(handler=cmd_convolve)

    p = sub.add_parser("train", help="Quantization-aware training of TinyNet")
    p.add_argument("--dataset", type=Path, nargs=2, required=True, metavar=("IMAGES", "LABELS"),
                   help="IDX image and label files")
    p.add_argument("--mode", choices=["real", "bnn", "radix", "all"], default="radix", help="Weight mode")
    p.add_argument("--radix", type=int, default=5, help="Radix X (default: 5)")
    p.add_argument("--epochs", type=int, default=20, help="Training epochs (default: 20)")
    p.add_argument("--seed", type=int, default=0, help="Seed (default: 0)")
    p.add_argument("--out", type=Path, required=True, help="Checkpoint path")
    p.add_argument("--trace", type=Path, default=None, help="Accuracy CSV (default: checkpoint with .csv)")
    p.add_argument("--count", type=int, default=1000, help="Samples to load (default: 1000)")
    p.add_argument("--size", type=int, choices=[8, 28], default=8, help="Input size (default: 8)")
    p.add_argument("--lr", type=float, default=1e-3, help="ADAM learning rate (default: 1e-3)")
    p.add_argument("--batch-size", type=int, default=32, help="Batch size (default: 32)")
    p.add_argument("--real-activations", action="store_true", help="Keep hidden activations real-valued")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("report", help="Column/device cost comparison")
    p.add_argument("--rows", type=int, required=True, help="Input rows n")
    p.add_argument("--cols", type=int, required=True, help="Logical columns m")
    p.add_argument("--radix", type=int, default=5, help="Radix X (default: 5)")
    p.add_argument("--bits", type=int, default=2, help="Baseline weight bits (default: 2)")
    p.add_argument("--csv", action="store_true", help="CSV instead of a table")
    p.set_defaults(handler=cmd_report)

    for action in sub.choices.values():
        action.add_argument("--quiet", action="store_true", help="No progress output")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the radix-xbar command."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except RadixXbarError as e:
        print(f"❌ {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"❌ invalid parameters: {e.errors()[0]['msg']}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
