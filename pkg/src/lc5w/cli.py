"""Command-line front end: encode, decode, report, analyze, phantom.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or corrupt
input), 3 internal assertion.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from . import report as _report
from .container import MODES, CodecConfig, decode, encode_with_stats
from .errors import CodecError
from .volume_io import (FORMATS, PhantomSpec, Volume, generate_phantom,
                        read_volume, write_volume)

_ORIENTATIONS = ("HL", "LH", "HH")


class UsageError(Exception):
    """Bad flag value discovered after argparse (spec strings, files)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the documented contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_thresholds(path) -> dict:
    """Parse a 9-entry override file: one ``ORIENT LEVEL VALUE`` per line,
    ``#`` comments allowed. All nine (orientation, level) pairs for levels
    1..3 must appear exactly once."""
    table: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read thresholds file: {exc}") from None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise UsageError(f"{path}:{ln}: expected 'ORIENT LEVEL VALUE'")
        orientation = parts[0].upper()
        if orientation not in _ORIENTATIONS:
            raise UsageError(f"{path}:{ln}: unknown orientation {parts[0]!r}")
        try:
            key = (orientation, int(parts[1]))
            value = float(parts[2])
        except ValueError:
            raise UsageError(f"{path}:{ln}: bad level or value") from None
        if key in table:
            raise UsageError(f"{path}:{ln}: duplicate entry {orientation} "
                             f"{key[1]}")
        table[key] = value
    expected = {(o, lvl) for o in _ORIENTATIONS for lvl in (1, 2, 3)}
    if set(table) != expected:
        missing = ", ".join(f"{o} {lvl}"
                            for o, lvl in sorted(expected - set(table)))
        raise UsageError(f"{path}: need all 9 entries, missing: {missing}")
    return table


def parse_phantom(text: str) -> PhantomSpec:
    """``kind:WxHxT[:key=value]...`` with keys seed, bs, rot, zoom, depth."""
    head, _, rest = text.partition(":")
    m = re.match(r"(\d+)x(\d+)x(\d+)(?::|$)", rest)
    if not head or m is None:
        raise UsageError(
            f"bad phantom spec {text!r}: want kind:WxHxT[:key=value]")
    width, height, frames = map(int, m.groups())
    kwargs = {}
    fields = {"seed": ("seed", int), "bs": ("block_size", int),
              "rot": ("rotation_deg", float), "zoom": ("zoom", float),
              "depth": ("bit_depth", int)}
    for item in rest[m.end():].split(":"):
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep or key not in fields:
            raise UsageError(f"bad phantom option {item!r} "
                             f"(known: {', '.join(sorted(fields))})")
        name, cast = fields[key]
        try:
            kwargs[name] = cast(value)
        except ValueError:
            raise UsageError(f"bad phantom option value {item!r}") from None
    try:
        return PhantomSpec(kind=head, width=width, height=height,
                           frames=frames, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(args, mode: str = "none") -> CodecConfig:
    thresholds = None
    if getattr(args, "thresholds", None):
        thresholds = load_thresholds(args.thresholds)
    try:
        return CodecConfig(block_size=args.bs, search_range=args.search,
                           spatial_levels=args.levels_spatial,
                           temporal_levels=args.levels_temporal,
                           code_block=args.cb_size, mode=mode,
                           thresholds=thresholds)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_volume(args) -> Volume:
    if getattr(args, "phantom", None):
        return generate_phantom(parse_phantom(args.phantom))
    if args.input is None:
        raise UsageError("either --input or --phantom is required")
    return read_volume(args.input, args.format)


def cmd_encode(args) -> int:
    vol = read_volume(args.input, args.format)
    blob, stats = encode_with_stats(vol, _config(args, args.mode))
    Path(args.output).write_bytes(blob)
    print(f"wrote {args.output}: {len(blob)} bytes "
          f"({vol.width}x{vol.height}x{len(vol)}, {vol.bit_depth}-bit, "
          f"mode={stats.mode})")
    print(f"  header {stats.header_bytes}  motion {stats.motion_total}  "
          f"signaling {stats.signaling_total}  "
          f"hp payload {stats.hp_payload_total}  "
          f"lp payload {stats.lp_payload_total}")
    return 0


def cmd_decode(args) -> int:
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    vol = decode(data)
    write_volume(vol, args.output, args.format)
    kind = "signed" if vol.signed else "unsigned"
    print(f"wrote {args.output}: {vol.width}x{vol.height}x{len(vol)} "
          f"{vol.bit_depth}-bit {kind}")
    return 0


def cmd_report(args) -> int:
    vol = _load_volume(args)
    rep = _report.build_report(vol, _config(args), parallel=not args.serial)
    hp = {m: rep.totals[m]["hp_payload"] for m in MODES}
    # The whole point of the optimum decision: it can never lose.
    if not (hp["opt"] <= hp["lc"] and hp["opt"] <= hp["none"]):
        raise AssertionError(f"optimum-decision dominance violated: {hp}")
    print(_report.render_table(rep))
    print()
    print(_report.render_kv(rep))
    if args.out_dir:
        paths = _report.write_outputs(rep, args.out_dir)
        print()
        for p in paths:
            print(f"wrote {p}")
    return 0


def cmd_analyze(args) -> int:
    vol = _load_volume(args)
    try:
        rows = _report.analyze_frame(vol, _config(args), args.frame)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    head = (f"{'band':4} {'level':>5} {'Q':>10} {'theta':>6} "
            f"{'rate(original)':>15} {'rate(resorted)':>15} {'LC':>4} "
            f"{'OPT':>4}")
    print(head)
    print("-" * len(head))
    for r in rows:
        print(f"{r.orientation:4} {r.level:>5} {r.quotient:>10.4f} "
              f"{r.threshold:>6.3f} {r.rate_plain:>15} {r.rate_sorted:>15} "
              f"{'yes' if r.lc else 'no':>4} {'yes' if r.opt else 'no':>4}")
    return 0


def cmd_phantom(args) -> int:
    vol = generate_phantom(parse_phantom(args.spec))
    write_volume(vol, args.output, args.format)
    print(f"wrote {args.output}: {vol.width}x{vol.height}x{len(vol)} "
          f"{vol.bit_depth}-bit ({args.spec})")
    return 0


def _add_codec_flags(p) -> None:
    p.add_argument("--bs", type=int, default=16,
                   help="motion block size (default 16)")
    p.add_argument("--search", type=int, default=15,
                   help="motion search range (default 15)")
    p.add_argument("--levels-spatial", type=int, default=7,
                   help="2-D wavelet levels (default 7)")
    p.add_argument("--levels-temporal", type=int, default=1,
                   help="temporal lifting levels (default 1)")
    p.add_argument("--cb-size", type=int, default=64,
                   help="entropy-coder code-block size (default 64)")
    p.add_argument("--thresholds", metavar="FILE",
                   help="9-entry decision-threshold override file")


def _add_volume_source(p) -> None:
    p.add_argument("--input", help="input volume path")
    p.add_argument("--format", choices=FORMATS, default="raw16le")
    p.add_argument("--phantom", metavar="SPEC",
                   help="synthesize input instead: kind:WxHxT[:key=value]")


def build_parser() -> _Parser:
    parser = _Parser(prog="lc5w", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("encode", help="compress a volume")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=FORMATS, default="raw16le")
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=MODES, default="none",
                   help="re-sorting decision mode (default none)")
    _add_codec_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a container")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=FORMATS, default="raw16le")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("report",
                       help="compare rates under all three decision modes")
    _add_volume_source(p)
    _add_codec_flags(p)
    p.add_argument("--out-dir", help="also write CSV tables and figures here")
    p.add_argument("--serial", action="store_true",
                   help="encode the three modes sequentially")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("analyze",
                       help="per-band decision detail for one frame")
    _add_volume_source(p)
    _add_codec_flags(p)
    p.add_argument("--frame", type=int, required=True,
                   help="differential (highpass) frame index")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("phantom", help="write a synthetic test volume")
    p.add_argument("--spec", required=True,
                   help="kind:WxHxT[:key=value], kinds: ellipsoid-motion, "
                        "blocky-residual")
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=FORMATS, default="raw16le")
    p.set_defaults(func=cmd_phantom)
    return parser


def entry(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 1
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CodecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - wants a bug to trigger
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(entry())
