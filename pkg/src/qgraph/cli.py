"""Command-line front end.

Exit codes: 0 on success, 1 for unusable arguments or configuration, 2 when
the library rejects the request (domain errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .chain import (
    band_structure,
    build_candidate,
    closed_chain_spectrum,
    sample_eigenfunction,
    vertex_modulus_jump,
)
from .config import ConfigError, RunConfig, canonical_config, load_config
from .exceptions import InvarianceObstruction, NotInBandError, QGraphError, SingularEliminationError
from .extensions import (
    blockwise_spectrum,
    build_block_unitary,
    node_block,
    partial_cayley,
)
from .pointint import PointInteractionModel, compare_formula_to_oracle, psi_k_oracle, psi_k_paper
from .symmetry import solve_theta, theta_grid_min_residual, z_invariance_residuals

log = logging.getLogger("qgraph")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _c(z: complex) -> str:
    z = complex(z)
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return f"{re:.12g}{im:+.12g}j"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _need_chain(run: RunConfig):
    if run.chain is None:
        raise ConfigError("this command needs a 'chain' block in the configuration")
    return run.chain


def _param(args, run: RunConfig, name: str, config_key: str | None = None, default=None):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return run.params.get(config_key or name, default)


def _suffixed(path: Path, i: int, n: int) -> Path:
    return path if n == 1 else path.with_name(f"{path.stem}_k{i}{path.suffix}")


def _ks(args, run: RunConfig) -> list[float]:
    ks = args.k if args.k is not None else run.params.get("k")
    if ks is None:
        raise ConfigError("no wavenumber given (use --k or 'k' in the config)")
    ks = ks if isinstance(ks, list) else [ks]
    out = []
    for k in ks:
        if isinstance(k, bool) or not isinstance(k, (int, float)) or not k > 0:
            raise ConfigError(f"k: expected positive numbers, got {k!r}")
        out.append(float(k))
    return out


# --------------------------------------------------------------------------
# commands


def validate_report(run: RunConfig) -> list[str]:
    lines = []
    if run.graph is not None:
        U = build_block_unitary(run.graph, run.vertex_params)
        spec = blockwise_spectrum(U)
        lines.append(f"graph: {len(run.graph.vertices)} vertices, {len(run.graph.edges)} edges")
        lines.append("block eigenvalues: " + ", ".join(_c(z) for z in spec.distinct()))
        lines.append(f"gap margin {_fmt(spec.margin)} (gap at -1: {'yes' if spec.gap else 'no'})")
    if run.chain is not None:
        cfg = run.chain
        graph = cfg.graph()
        params = cfg.cell_params()
        U = build_block_unitary(graph, params, builder=node_block)
        spec = blockwise_spectrum(U)
        lines.append(
            f"chain: cells {cfg.window[0]}..{cfg.window[1]}, {len(graph.vertices)} vertices, "
            f"{len(graph.edges)} edges, l_u={_fmt(cfg.l_u)}, l_v={_fmt(cfg.l_v)}"
        )
        lines.append("block eigenvalues: " + ", ".join(_c(z) for z in spec.distinct()))
        margin = _fmt(spec.margin)
        if run.theta is not None:
            res = z_invariance_residuals(params, run.theta)
            worst = max(res.values()) if res else 0.0
            if worst < 1e-10:
                lines.append(f"Z-invariant: yes, theta=given, gap margin {margin}")
            else:
                bad = min(v for v, r in res.items() if r >= 1e-10)
                lines.append(f"Z-invariant: no for the given theta, first failing vertex {bad} "
                             f"(residual {worst:.3e}), gap margin {margin}")
        else:
            try:
                theta = solve_theta(params)
            except InvarianceObstruction as exc:
                lines.append(f"Z-invariant: no, obstruction at vertex {exc.vertex}")
                lines.append(f"reason: {exc}")
            else:
                tag = "0" if theta.is_zero() else "solved"
                lines.append(f"Z-invariant: yes, theta={tag}, gap margin {margin}")
                if not theta.is_zero():
                    lines.append("theta: " + json.dumps(theta.to_dict(), sort_keys=True))
    if not lines:
        raise ConfigError("configuration has neither a 'chain' nor a 'graph' block")
    return lines


def cmd_validate(args, run: RunConfig) -> int:
    for line in validate_report(run):
        print(line)
    if args.out:
        Path(args.out).write_text(json.dumps(canonical_config(run), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_block(args, run: RunConfig) -> int:
    cfg = _need_chain(run)
    cells = [args.cells] if args.cells is not None else list(cfg.cells)
    doc = {}
    for c in cells:
        U = node_block(cfg.params(c))
        A = partial_cayley(U)
        doc[str(c)] = {
            "delta": cfg.params(c).delta,
            "alphas": list(cfg.params(c).alphas),
            "U_re": U.real.tolist(),
            "U_im": U.imag.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in blockwise_spectrum([U]).distinct()],
            "cayley_re": A.real.tolist(),
            "cayley_im": A.imag.tolist(),
        }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(cells)} block(s) to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_invariance(args, run: RunConfig) -> int:
    cfg = _need_chain(run)
    params = cfg.cell_params()
    theta = run.theta
    rows = []
    if theta is None:
        try:
            theta = solve_theta(params)
        except InvarianceObstruction as exc:
            best = theta_grid_min_residual(params, exc.vertex)
            print(f"obstruction at vertex {exc.vertex} ({exc.reason})")
            print(f"theta grid search (2 pi/64) at vertex {exc.vertex}: min residual {best:.6e}")
            return 0
    res = z_invariance_residuals(params, theta)
    rows = [(v, r) for v, r in sorted(res.items())]
    worst = max(res.values()) if res else 0.0
    print(f"max residual {worst:.6e} over {len(rows)} interior vertices")
    if args.out:
        io.write_table(args.out, ("vertex", "residual"), rows)
    return 0


def cmd_band(args, run: RunConfig) -> int:
    cfg = _need_chain(run)
    k_min = _param(args, run, "kmin", "k_min")
    k_max = _param(args, run, "kmax", "k_max")
    samples = int(_param(args, run, "samples", default=400))
    if k_min is None or k_max is None:
        raise ConfigError("band needs --kmin and --kmax")
    scan = band_structure(cfg, float(k_min), float(k_max), samples)
    out = Path(args.out or "band.csv")
    io.write_band_csv(out, scan)
    print(f"{samples} samples written to {out}; |det T| in [{scan.det_abs.min():.15f}, {scan.det_abs.max():.15f}]")
    for a, b in scan.gaps():
        print(f"no unit-modulus eigenvalue for k in [{_fmt(a)}, {_fmt(b)}]")
    return 0


def _figure_candidate(cfg, k: float):
    try:
        return build_candidate(cfg, k, bloch=True), "bloch"
    except (NotInBandError, SingularEliminationError) as exc:
        log.warning("k=%g: %s; propagating the seed (1, 0) instead", k, exc)
        return build_candidate(cfg, k), "propagated"


def cmd_eigenfunction(args, run: RunConfig) -> int:
    cfg = _need_chain(run)
    n_cells = _param(args, run, "cells")
    if n_cells is not None:
        if int(n_cells) < 1:
            raise ConfigError("--cells must be at least 1")
        cfg = cfg.with_window((cfg.window[0], cfg.window[0] + int(n_cells) - 1))
    points = int(_param(args, run, "points", "points_per_edge", 33))
    ks = _ks(args, run)
    out = Path(args.out or "eigenfunction.csv")
    for i, k in enumerate(ks):
        cand, how = _figure_candidate(cfg, k)
        rows = sample_eigenfunction(cand, points)
        path = io.write_eigenfunction_csv(_suffixed(out, i, len(ks)), rows)
        print(f"k={k:.12g} ({how} band candidate): residual {cand.residual:.3e}, "
              f"max |Phi| jump {vertex_modulus_jump(cand):.3e} -> {path}")
    return 0


def cmd_closed(args, run: RunConfig) -> int:
    cfg = _need_chain(run)
    m = _param(args, run, "m")
    k_max = _param(args, run, "kmax", "k_max")
    samples = int(_param(args, run, "samples", default=2000))
    if m is None or k_max is None:
        raise ConfigError("closed needs --m and --kmax")
    roots = closed_chain_spectrum(cfg, int(m), float(k_max), samples)
    out = Path(args.out or "closed.csv")
    io.write_roots_csv(out, roots)
    worst = max((r.residual for r in roots), default=0.0)
    print(f"{len(roots)} roots for m={m} up to k={_fmt(float(k_max))}; max residual {worst:.3e} -> {out}")
    return 0


def cmd_pointint(args, run: RunConfig) -> int:
    if run.pointint is None:
        raise ConfigError("this command needs a 'pointint' block in the configuration")
    model = PointInteractionModel(run.pointint["alpha"])
    ks = _ks(args, run)
    n = int(_param(args, run, "points", default=201))
    if n < 2:
        raise ConfigError("--points must be at least 2")
    x = np.linspace(run.pointint["x_min"], run.pointint["x_max"], n)
    out = Path(args.out or "pointint.csv")
    for i, k in enumerate(ks):
        rep = compare_formula_to_oracle(model, k, x)
        path = io.write_pointint_csv(_suffixed(out, i, len(ks)), x, psi_k_paper(model, k, x), psi_k_oracle(model, k, x))
        print(f"alpha={_fmt(model.alpha)} k={_fmt(k)}: printed formula continuity defect {rep.continuity_defect:.3e}, "
              f"jump defect {rep.jump_defect:.3e}, max deviation from oracle {rep.max_deviation:.3e} "
              f"(phase {rep.phase:.6f}) -> {path}")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "block": cmd_block,
    "invariance": cmd_invariance,
    "band": cmd_band,
    "eigenfunction": cmd_eigenfunction,
    "closed": cmd_closed,
    "pointint": cmd_pointint,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qgraph", description="Quasi-delta extensions and spectra of loop-chain quantum graphs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON configuration file")
        s.add_argument("--out", help="output path")
        s.add_argument("--k", type=float, nargs="+")
        s.add_argument("--kmin", type=float)
        s.add_argument("--kmax", type=float)
        s.add_argument("--samples", type=int)
        s.add_argument("--m", type=int)
        s.add_argument("--cells", type=int)
        s.add_argument("--points", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        run = load_config(args.config)
        return COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"qgraph: configuration error: {exc}", file=sys.stderr)
        return 1
    except QGraphError as exc:
        print(f"qgraph: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
