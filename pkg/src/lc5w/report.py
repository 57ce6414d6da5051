"""Three-way rate comparison (none / lc / opt) and per-band analysis.

The comparison re-encodes the same volume under each decision mode and
aggregates differential-frame coding cost (band payload plus signaling),
absolute/relative savings against the no-re-sort baseline, the relative
savings gap of the cheap decision versus the optimum one, and how often
the two decisions agree per band.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import resort, spatial, temporal, tier1
from .container import MODES, CodecConfig, encode_with_stats


@dataclass
class RateReport:
    candidates: list
    frame_bytes: dict  # mode -> per differential frame, payload + signaling
    totals: dict       # mode -> {hp_payload, signaling, hp_total, motion, lp_payload, file_bytes}
    decisions: dict    # mode -> per frame {(orientation, level): bool}
    quotients: list    # per frame {(orientation, level): float}
    savings_abs: dict
    savings_rel: dict
    rel_lc_opt_pct: float
    agreement: float


def build_report(vol, base: CodecConfig | None = None,
                 parallel: bool = True) -> RateReport:
    """Encode under all three modes (concurrently by default)."""
    base = base or CodecConfig()

    def run(mode):
        return encode_with_stats(vol, replace(base, mode=mode))

    if parallel:
        with ThreadPoolExecutor(len(MODES)) as pool:
            results = dict(zip(MODES, pool.map(run, MODES)))
    else:
        results = {m: run(m) for m in MODES}

    totals, frame_bytes, decisions = {}, {}, {}
    for mode in MODES:
        stats = results[mode][1]
        hp = stats.hp_payload_total
        sig = stats.signaling_total
        totals[mode] = {
            "hp_payload": hp,
            "signaling": sig,
            "hp_total": hp + sig,
            "motion": stats.motion_total,
            "lp_payload": stats.lp_payload_total,
            "file_bytes": stats.total_bytes,
        }
        frame_bytes[mode] = [f.payload_bytes + f.signaling_bytes
                             for f in stats.hp_frames]
        decisions[mode] = [dict(f.decisions) for f in stats.hp_frames]

    none_stats = results["none"][1]
    candidates = resort.candidate_keys(none_stats.block_size,
                                       none_stats.spatial_levels)
    quotients = [dict(f.quotients) for f in none_stats.hp_frames]

    base_total = totals["none"]["hp_total"]
    savings_abs = {m: base_total - totals[m]["hp_total"] for m in MODES}
    savings_rel = {m: (savings_abs[m] / base_total if base_total else 0.0)
                   for m in MODES}
    rel = (100.0 * (savings_abs["lc"] - savings_abs["opt"]) / savings_abs["opt"]
           if savings_abs["opt"] else 0.0)

    pairs = agree = 0
    for f_lc, f_opt in zip(decisions["lc"], decisions["opt"]):
        for key in candidates:
            pairs += 1
            agree += f_lc[key] == f_opt[key]
    return RateReport(candidates, frame_bytes, totals, decisions, quotients,
                      savings_abs, savings_rel, rel,
                      agree / pairs if pairs else 1.0)


def render_table(r: RateReport) -> str:
    """Fixed-width summary table, one row per mode."""
    head = (f"{'mode':6} {'hp payload':>11} {'signaling':>10} {'hp total':>10} "
            f"{'file bytes':>11} {'abs savings':>12} {'rel %':>8}")
    lines = [head, "-" * len(head)]
    for m in MODES:
        t = r.totals[m]
        lines.append(
            f"{m:6} {t['hp_payload']:>11} {t['signaling']:>10} "
            f"{t['hp_total']:>10} {t['file_bytes']:>11} "
            f"{r.savings_abs[m]:>12} {100 * r.savings_rel[m]:>8.3f}")
    lines.append("")
    lines.append(f"rel LC/OPT: {r.rel_lc_opt_pct:.3f}%   "
                 f"decision agreement: {r.agreement:.3f}")
    return "\n".join(lines)


def render_kv(r: RateReport) -> str:
    """Line-oriented key=value form with a stable schema (see README)."""
    lines = [f"report.hp_frames={len(r.frame_bytes['none'])}",
             f"report.candidates={len(r.candidates)}"]
    for m in MODES:
        for key, value in r.totals[m].items():
            lines.append(f"report.{m}.{key}={value}")
    for m in MODES:
        lines.append(f"report.savings_abs.{m}={r.savings_abs[m]}")
        lines.append(f"report.savings_rel.{m}={r.savings_rel[m]:.6f}")
    lines.append(f"report.rel_lc_opt_pct={r.rel_lc_opt_pct:.6f}")
    lines.append(f"report.agreement={r.agreement:.6f}")
    return "\n".join(lines)


def write_outputs(r: RateReport, out_dir) -> list:
    """Write report.csv / frames.csv / metrics.csv plus PNG figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    p = out / "report.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "hp_payload", "signaling", "hp_total", "motion",
                    "lp_payload", "file_bytes", "savings_abs",
                    "savings_rel_pct"])
        for m in MODES:
            t = r.totals[m]
            w.writerow([m, t["hp_payload"], t["signaling"], t["hp_total"],
                        t["motion"], t["lp_payload"], t["file_bytes"],
                        r.savings_abs[m], f"{100 * r.savings_rel[m]:.4f}"])
    paths.append(p)

    p = out / "frames.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame"] + [f"{m}_bytes" for m in MODES])
        for i in range(len(r.frame_bytes["none"])):
            w.writerow([i] + [r.frame_bytes[m][i] for m in MODES])
    paths.append(p)

    p = out / "metrics.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerow(["rel_lc_opt_pct", f"{r.rel_lc_opt_pct:.6f}"])
        w.writerow(["agreement", f"{r.agreement:.6f}"])
    paths.append(p)

    paths.extend(_write_figures(r, out))
    return paths


def _write_figures(r: RateReport, out: Path) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    for m in MODES:
        ax.plot(r.frame_bytes[m], marker="o", markersize=3, label=m)
    ax.set_xlabel("differential frame")
    ax.set_ylabel("coded bytes")
    ax.set_title("per-frame coding cost by decision mode")
    ax.legend()
    fig.tight_layout()
    p = out / "frames.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    xs = range(len(MODES))
    ax.bar(xs, [r.totals[m]["hp_total"] for m in MODES],
           color=["#888888", "#4477aa", "#228833"])
    for i, m in enumerate(MODES):
        ax.annotate(f"{r.totals[m]['hp_total']}", (i, r.totals[m]["hp_total"]),
                    ha="center", va="bottom", fontsize=8)
    ax.set_xticks(list(xs), MODES)
    ax.set_ylabel("differential-band bytes (payload + signaling)")
    ax.set_title("total cost by decision mode")
    fig.tight_layout()
    p = out / "totals.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    if r.candidates and r.decisions["lc"]:
        import numpy as np

        lc = np.array([[f[k] for k in r.candidates] for f in r.decisions["lc"]],
                      dtype=int)
        opt = np.array([[f[k] for k in r.candidates] for f in r.decisions["opt"]],
                       dtype=int)
        grid = lc + 2 * opt  # 0 neither, 1 lc only, 2 opt only, 3 both
        from matplotlib.colors import ListedColormap

        fig, ax = plt.subplots(figsize=(7.0, 3.5))
        im = ax.imshow(grid, aspect="auto", interpolation="nearest",
                       cmap=ListedColormap(["#eeeeee", "#ee6677", "#ccbb44",
                                            "#228833"]), vmin=0, vmax=3)
        ax.set_yticks(range(grid.shape[0]))
        ax.set_xticks(range(len(r.candidates)),
                      [f"{o}{lvl}" for o, lvl in r.candidates], fontsize=8)
        ax.set_xlabel("candidate band")
        ax.set_ylabel("differential frame")
        ax.set_title("re-sort decisions (grey none, red lc, yellow opt, green both)")
        fig.colorbar(im, ticks=[0, 1, 2, 3])
        fig.tight_layout()
        p = out / "decisions.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)
    return paths


@dataclass
class BandAnalysis:
    orientation: str
    level: int
    quotient: float
    threshold: float
    rate_plain: int
    rate_sorted: int
    lc: bool
    opt: bool


def analyze_frame(vol, cfg: CodecConfig | None, index: int) -> list:
    """Quotient, threshold, both coded rates and both decisions for every
    candidate band of one differential frame."""
    cfg = cfg or CodecConfig()
    bs, search, d, lt = cfg.effective(vol.height, vol.width, len(vol))
    frames = [f.samples for f in vol.frames]
    decomp = temporal.forward(frames, cfg.temporal_levels, bs,
                              cfg.search_range, update=True, search=search)
    hp = [h for stage in decomp.stages for h in stage.hp]
    if not 0 <= index < len(hp):
        raise ValueError(
            f"differential frame index {index} out of range 0..{len(hp) - 1}")
    pyr = spatial.forward_2d(hp[index], d)
    rows = []
    for orientation, level in resort.candidate_keys(bs, d):
        band = pyr.bands[(orientation, level)].coeffs
        q = resort.lc_statistic(band, orientation, bs, level)
        theta = resort.threshold_for(orientation, level, cfg.thresholds)
        plain = tier1.subband_rate(band, cfg.code_block)
        swapped = tier1.subband_rate(
            resort.resort_band(band, orientation, bs, level), cfg.code_block)
        rows.append(BandAnalysis(orientation, level, q, theta, plain, swapped,
                                 q < theta, swapped < plain))
    return rows
