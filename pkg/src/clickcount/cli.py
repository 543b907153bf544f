"""Command-line driver.

Commands: clicks, compare, qscan, simulate, povm, photons.  Each writes a
table (CSV with a ``#`` manifest header, or JSON) to ``--output`` or stdout.

Exit codes: 0 success, 1 usage error, 2 numerical-stability failure,
3 resource or overflow failure.
"""
from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from typing import Any

import numpy as np

from . import __version__
from .errors import ClickCountError, StabilityError, ValidationError
from .kernel import (
    ClickDistribution,
    DetectorConfig,
    Diagnostics,
    click_distribution,
    coherent_click_distribution,
    coherent_click_q_closed,
    fock_click_prob_info,
    mandel_distribution,
    mandel_q,
    povm_fock_matrix,
)
from .montecarlo import SimOptions, compare_distributions, simulate_clicks
from .states import (
    DEFAULT_TRUNC_TOL,
    PhotonNumberDistribution,
    coherent_pnd,
    fock_pnd,
    load_pnd,
    odd_coherent_pnd,
    squeezed_vacuum_pnd,
)
from .tables import FORMATS, render

EXIT_OK, EXIT_USAGE, EXIT_STABILITY, EXIT_RESOURCE = 0, 1, 2, 3
Q_AGREEMENT = 1e-10

STATE_KINDS = ("fock", "coherent", "squeezed", "odd", "file", "vacuum")

# fig4 rows: (label, eta, total noise); click detectors get nu_total / N each
FIG4_SCENARIOS = (("perfect", 1.0, 0.0), ("loss", 0.8, 0.0), ("noise", 1.0, 0.2), ("both", 0.8, 0.2))

PRESETS: dict[str, tuple[str, dict[str, Any]]] = {
    **{
        f"fig2{tag}": ("clicks", {"state": ["fock:8", "fock:9"], "detectors": n})
        for tag, n in zip("abcd", (10, 100, 1000, 10_000))
    },
    "fig3a": ("photons", {"state": ["squeezed:1"]}),
    **{
        f"fig3{tag}": ("clicks", {"state": ["squeezed:1"], "steps": s})
        for tag, s in zip("bcd", (3, 4, 5))
    },
    "fig4": ("compare", {"detectors": 25}),
    "fig5": ("qscan", {"alpha2": 20.0, "n_max": 1024}),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit with 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(ClickCountError):
    exit_code = EXIT_USAGE


def parse_state(spec: str, trunc_tol: float = DEFAULT_TRUNC_TOL) -> PhotonNumberDistribution:
    """Parse ``kind:param`` (``fock:8``, ``coherent:20``, ``squeezed:1``,
    ``odd:4``, ``file:path``, ``vacuum``)."""
    kind, _, param = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "vacuum" and not param:
        return fock_pnd(0)
    if kind not in STATE_KINDS or not param:
        raise UsageError(f"bad state spec {spec!r}; expected one of {', '.join(STATE_KINDS)} as kind:param")
    if kind == "file":
        return load_pnd(param)
    try:
        value = float(param)
    except ValueError:
        raise UsageError(f"state parameter {param!r} is not a number") from None
    if kind == "fock":
        if value != int(value):
            raise UsageError(f"Fock photon number must be an integer, got {param!r}")
        return fock_pnd(int(value))
    if kind == "coherent":
        return coherent_pnd(value, trunc_tol)
    if kind == "squeezed":
        return squeezed_vacuum_pnd(value, trunc_tol)
    return odd_coherent_pnd(value, trunc_tol)


# ---------------------------------------------------------------------------
# argument plumbing


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv")


def _add_detector(p: argparse.ArgumentParser, weights: bool = False) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("-N", "--detectors", type=int, help="number of on/off detectors")
    g.add_argument("--steps", type=int, help="multiplexing steps s, N = 2^s")
    g.add_argument("--array", type=int, help="array side d, N = d^2")
    p.add_argument("--eta", type=float, default=1.0, help="quantum efficiency (default 1)")
    n = p.add_mutually_exclusive_group()
    n.add_argument("--nu", type=float, help="per-detector noise exponent (default 0)")
    n.add_argument("--nu-total", type=float, help="total noise, split as nu = nu_total / N")
    if weights:
        p.add_argument("--weights", help="comma-separated splitting intensities (coherent input only)")


def _add_preset(p: argparse.ArgumentParser, command: str) -> None:
    names = [k for k, (cmd, _) in PRESETS.items() if cmd == command]
    if names:
        p.add_argument("--preset", choices=names, help="fill in the parameters of a figure")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clickcount", description="Click statistics of multiplexed on/off detectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("clicks", help="click-count distribution p_k")
    p.add_argument("--state", action="append", help="state spec, repeatable (one column each)")
    p.add_argument("--trunc-tol", type=float, default=DEFAULT_TRUNC_TOL)
    _add_detector(p, weights=True)
    _add_preset(p, "clicks")
    _add_output(p)

    p = sub.add_parser("compare", help="click statistics next to Mandel photo-counts")
    p.add_argument("--state")
    p.add_argument("--alpha2", type=float, help="odd coherent amplitude |alpha|^2 for --preset fig4")
    p.add_argument("--trunc-tol", type=float, default=DEFAULT_TRUNC_TOL)
    _add_detector(p)
    _add_preset(p, "compare")
    _add_output(p)

    p = sub.add_parser("qscan", help="Mandel Q of coherent-state clicks versus N")
    p.add_argument("--alpha2", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n-max", type=int, help="scan N = 1..n_max (default 1024)")
    g.add_argument("--n-list", help="comma-separated list of N")
    _add_preset(p, "qscan")
    _add_output(p)

    p = sub.add_parser("simulate", help="Monte Carlo histogram against the analytic distribution")
    p.add_argument("--state", required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trunc-tol", type=float, default=DEFAULT_TRUNC_TOL)
    _add_detector(p, weights=True)
    _add_output(p)

    p = sub.add_parser("povm", help="Fock-diagonal POVM matrix c[k|n]")
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--method", choices=("recurrence", "closed"), default="recurrence")
    _add_detector(p)
    _add_output(p)

    p = sub.add_parser("photons", help="photon-number distribution of a state")
    p.add_argument("--state", action="append")
    p.add_argument("--trunc-tol", type=float, default=DEFAULT_TRUNC_TOL)
    _add_preset(p, "photons")
    _add_output(p)
    return parser


def _apply_preset(args: argparse.Namespace) -> None:
    name = getattr(args, "preset", None)
    if not name:
        return
    _, values = PRESETS[name]
    for key, value in values.items():
        if key in ("detectors", "steps", "array"):
            if args.detectors is None and args.steps is None and args.array is None:
                setattr(args, key, value)
        elif getattr(args, key, None) is None:
            setattr(args, key, value)
    if name == "fig4":
        if args.alpha2 is None:
            raise UsageError("--preset fig4 needs --alpha2: the odd coherent amplitude is not fixed by the figure")
        if args.state is None:
            args.state = f"odd:{args.alpha2:g}"


def _n_detectors(args: argparse.Namespace) -> int:
    if args.steps is not None:
        if args.steps < 0:
            raise UsageError("--steps must be >= 0")
        return 2 ** args.steps
    if args.array is not None:
        if args.array < 1:
            raise UsageError("--array must be >= 1")
        return args.array ** 2
    if args.detectors is None:
        raise UsageError("give one of --detectors, --steps or --array")
    return args.detectors


def _config(args: argparse.Namespace) -> DetectorConfig:
    big_n = _n_detectors(args)
    if args.nu_total is not None:
        nu = args.nu_total / big_n
    else:
        nu = 0.0 if args.nu is None else args.nu
    weights = None
    raw = getattr(args, "weights", None)
    if raw:
        try:
            weights = tuple(float(w) for w in raw.split(","))
        except ValueError:
            raise UsageError(f"cannot parse --weights {raw!r}") from None
    return DetectorConfig(big_n, args.eta, nu, weights)


def _config_manifest(cfg: DetectorConfig) -> dict[str, Any]:
    out: dict[str, Any] = {"n_detectors": cfg.n_detectors, "eta": cfg.eta, "nu": cfg.nu}
    if cfg.weights is not None:
        out["weights"] = list(cfg.weights)
    return out


def _state_distribution(spec: str, pnd: PhotonNumberDistribution, cfg: DetectorConfig) -> ClickDistribution:
    kind, _, param = spec.partition(":")
    if kind.strip().lower() == "coherent":
        # closed binomial / Poisson-binomial form, free of truncation error
        return coherent_click_distribution(float(param), cfg)
    if not cfg.is_uniform:
        raise UsageError("--weights is only supported for coherent input states")
    return click_distribution(pnd, cfg)


def _emit(args: argparse.Namespace, manifest: dict[str, Any], columns: Sequence[str], rows) -> None:
    full = {"command": args.command, "version": __version__, **manifest}
    text = render(full, columns, rows, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _diag_dict(diags: Sequence[Diagnostics]) -> dict[str, Any]:
    total = Diagnostics()
    for d in diags:
        total = total.merge(d)
    return total.as_dict()


# ---------------------------------------------------------------------------
# commands


def cmd_clicks(args: argparse.Namespace) -> None:
    if not args.state:
        raise UsageError("clicks needs at least one --state")
    cfg = _config(args)
    dists, tails = [], []
    for spec in args.state:
        pnd = parse_state(spec, args.trunc_tol)
        dists.append(_state_distribution(spec, pnd, cfg))
        tails.append(pnd.tail_bound if not spec.lower().startswith("coherent") else 0.0)
    cols = ["k"] + (["p_click"] if len(dists) == 1 else [f"p_click[{s}]" for s in args.state])
    rows = [[k] + [d.probs[k] for d in dists] for k in range(cfg.n_detectors + 1)]
    manifest = {
        "states": list(args.state),
        **_config_manifest(cfg),
        "trunc_tol": args.trunc_tol,
        "tail_bounds": tails,
        "diagnostics": _diag_dict([d.diagnostics for d in dists]),
    }
    if args.preset:
        manifest["preset"] = args.preset
    _emit(args, manifest, cols, rows)


def cmd_compare(args: argparse.Namespace) -> None:
    if not args.state:
        raise UsageError("compare needs --state (or --preset fig4 --alpha2 A)")
    cfg = _config(args)
    pnd = parse_state(args.state, args.trunc_tol)
    if args.preset == "fig4":
        scenarios = [(label, eta, nu_t / cfg.n_detectors, nu_t) for label, eta, nu_t in FIG4_SCENARIOS]
    else:
        scenarios = [("", cfg.eta, cfg.nu, cfg.nu * cfg.n_detectors)]
    columns = ["k"]
    clicks, mandels, diags = [], [], []
    for label, eta, nu, nu_total in scenarios:
        scfg = DetectorConfig(cfg.n_detectors, eta, nu)
        dist = _state_distribution(args.state, pnd, scfg)
        clicks.append(dist.probs)
        diags.append(dist.diagnostics)
        mandels.append(mandel_distribution(pnd, eta, nu_total))
        suffix = f"_{label}" if label else ""
        columns += [f"p_click{suffix}", f"p_mandel{suffix}"]
    size = max(cfg.n_detectors + 1, max(m.size for m in mandels))
    rows = []
    for k in range(size):
        row: list[Any] = [k]
        for c, m in zip(clicks, mandels):
            row += [c[k] if k < c.size else 0.0, m[k] if k < m.size else 0.0]
        rows.append(row)
    manifest = {
        "state": args.state,
        "n_detectors": cfg.n_detectors,
        "scenarios": [
            {"label": lab or "single", "eta": eta, "nu": nu, "nu_total": nu_t} for lab, eta, nu, nu_t in scenarios
        ],
        "trunc_tol": args.trunc_tol,
        "tail_bound": pnd.tail_bound,
        "diagnostics": _diag_dict(diags),
    }
    if args.preset:
        manifest["preset"] = args.preset
    _emit(args, manifest, columns, rows)


def cmd_qscan(args: argparse.Namespace) -> None:
    if args.alpha2 is None:
        raise UsageError("qscan needs --alpha2")
    if not args.alpha2 > 0:
        raise UsageError("--alpha2 must be positive")
    if args.n_list:
        try:
            ns = [int(x) for x in args.n_list.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse --n-list {args.n_list!r}") from None
    else:
        ns = list(range(1, (args.n_max or 1024) + 1))
    if any(n < 1 for n in ns):
        raise UsageError("every N must be >= 1")
    rows = []
    worst = 0.0
    for n in ns:
        closed = coherent_click_q_closed(args.alpha2, n)
        numeric = mandel_q(coherent_click_distribution(args.alpha2, DetectorConfig(n)))
        worst = max(worst, abs(closed - numeric))
        rows.append([n, closed, numeric])
    if worst > Q_AGREEMENT:
        raise StabilityError(f"closed-form and distribution Q differ by {worst:.3g}")
    manifest = {"alpha2": args.alpha2, "n_values": len(ns), "max_q_discrepancy": worst}
    if args.preset:
        manifest["preset"] = args.preset
    _emit(args, manifest, ["N", "Q_closed", "Q_from_distribution"], rows)


def cmd_simulate(args: argparse.Namespace) -> None:
    cfg = _config(args)
    pnd = parse_state(args.state, args.trunc_tol)
    opts = SimOptions(args.samples, args.seed, args.workers)
    sim = simulate_clicks(pnd, cfg, opts)
    analytic = _state_distribution(args.state, pnd, cfg)
    tv, chi2 = compare_distributions(sim.empirical, analytic, samples=sim.samples)
    rows = [[k, sim.counts[k], sim.empirical.probs[k], analytic.probs[k]] for k in range(cfg.n_detectors + 1)]
    manifest = {
        "state": args.state,
        **_config_manifest(cfg),
        "samples": sim.samples,
        "seed": sim.seed,
        "generator": "PCG64, SeedSequence(seed, spawn_key=(shard,))",
        "tv_distance": tv,
        "chi2": chi2,
        "diagnostics": analytic.diagnostics.as_dict(),
    }
    _emit(args, manifest, ["k", "count", "p_empirical", "p_analytic"], rows)


def cmd_povm(args: argparse.Namespace) -> None:
    cfg = _config(args)
    if args.n_max < 0:
        raise UsageError("--n-max must be >= 0")
    diag = Diagnostics()
    if args.method == "closed":
        coeffs = np.empty((cfg.n_detectors + 1, args.n_max + 1))
        escalations = 0
        for k in range(cfg.n_detectors + 1):
            for n in range(args.n_max + 1):
                coeffs[k, n], escalated = fock_click_prob_info(n, k, cfg)
                escalations += escalated
        diag = Diagnostics(precision_escalations=escalations)
    else:
        coeffs = povm_fock_matrix(cfg, args.n_max).coeffs
    cols = ["k"] + [f"n={n}" for n in range(args.n_max + 1)]
    rows = [[k, *coeffs[k]] for k in range(cfg.n_detectors + 1)]
    manifest = {
        **_config_manifest(cfg),
        "n_max": args.n_max,
        "method": args.method,
        "diagnostics": diag.as_dict(),
    }
    _emit(args, manifest, cols, rows)


def cmd_photons(args: argparse.Namespace) -> None:
    if not args.state:
        raise UsageError("photons needs at least one --state")
    pnds = [parse_state(s, args.trunc_tol) for s in args.state]
    size = max(p.probs.size for p in pnds)
    cols = ["n"] + (["p_photon"] if len(pnds) == 1 else [f"p_photon[{s}]" for s in args.state])
    rows = [[n] + [p.probs[n] if n < p.probs.size else 0.0 for p in pnds] for n in range(size)]
    manifest = {
        "states": list(args.state),
        "trunc_tol": args.trunc_tol,
        "tail_bounds": [p.tail_bound for p in pnds],
    }
    if args.preset:
        manifest["preset"] = args.preset
    _emit(args, manifest, cols, rows)


COMMANDS = {
    "clicks": cmd_clicks,
    "compare": cmd_compare,
    "qscan": cmd_qscan,
    "simulate": cmd_simulate,
    "povm": cmd_povm,
    "photons": cmd_photons,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_preset(args)
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"clickcount: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ClickCountError as exc:
        print(f"clickcount: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OverflowError, MemoryError) as exc:
        print(f"clickcount: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
