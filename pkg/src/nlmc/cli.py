"""Command-line driver: ``nlmc solve | sweep | basis | validate | serve``.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 solver failure.
Every run is described by a YAML config (see :mod:`nlmc.config`); flags
override individual config keys.  With ``--server URL`` the work is delegated
to a running service and the returned artifacts are written locally.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import httpx

from .config import ExperimentConfig, apply_overrides, load_config
from .errors import ConfigError, NLMCError, SolverError
from .runner import run_basis, run_solve, run_sweep, run_validate

__all__ = ["main", "build_parser"]

DEFAULT_CONFIG = ExperimentConfig(n_side=100, N_side=10)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1 (default would be 2)."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _layers_arg(text: str) -> int | str:
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected an integer or 'auto', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("layer count must be non-negative")
    return value


def _values_arg(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("the value list is empty")
    return values


def _block_arg(text: str) -> int | None:
    if text == "center":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a block index or 'center', got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML config file")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    p.add_argument("--layers", type=_layers_arg, metavar="INT|auto",
                   help="oversampling layers, or 'auto' for the log-scaling rule")
    p.add_argument("--seed", type=int, metavar="INT", help="medium generator seed")
    p.add_argument("--threads", type=int, metavar="INT",
                   help="worker threads for basis construction")
    p.add_argument("--server", metavar="URL", help="delegate to a running service")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlmc",
                     description="Non-local multicontinuum upscaling for "
                                 "high-contrast elliptic problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one full upscaling experiment")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run one experiment per axis value")
    _add_common(p)
    p.add_argument("--axis", choices=("layers", "H", "contrast"), required=True)
    p.add_argument("--values", type=_values_arg, required=True, metavar="LIST",
                   help="comma-separated axis values, e.g. 1,2,3")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("basis", help="build one basis function and its decay profile")
    _add_common(p)
    p.add_argument("--block", type=_block_arg, default=None, metavar="INT|center",
                   help="owner block index (default: the center block)")
    p.add_argument("--region", type=int, default=0, metavar="INT",
                   help="region index within the block (default 0)")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("validate", help="run the built-in oracle suite")
    p.add_argument("--server", metavar="URL", help="delegate to a running service")
    p.add_argument("--perturb", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    base = load_config(args.config) if args.config else DEFAULT_CONFIG
    return apply_overrides(base, out_dir=args.out, layers=args.layers,
                           seed=args.seed, threads=args.threads)


def _post(server: str, endpoint: str, payload: dict) -> dict:
    url = server.rstrip("/") + endpoint
    try:
        resp = httpx.post(url, json=payload, timeout=600.0)
    except httpx.HTTPError as exc:
        raise ConfigError(f"cannot reach server at {url}: {exc}") from exc
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        if resp.status_code == 400 or resp.status_code == 422:
            raise ConfigError(f"server rejected the request: {detail}")
        raise SolverError(f"server failed ({resp.status_code}): {detail}")
    return resp.json()


def _write_artifacts(out_dir: str, artifacts: dict[str, str]) -> None:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in artifacts.items():
        (directory / name).write_text(text)
        print(f"wrote {directory / name}")


def _print_report(report: dict, timings: dict) -> None:
    print(f"e_L2 = {report['e_L2']:.6e}   (squared ratio {report['e_L2_sq']:.6e})")
    print(f"e_energy = {report['e_energy']:.6e}   e_L2_fine = {report['e_L2_fine']:.6e}")
    print(f"region mean error = {report['region_mean_error']:.3e}")
    print(f"layers = {report['layers']}   regions = {report['total_regions']}   "
          f"contrast = {report['contrast']:.6g}")
    print(f"timings: fine {timings['fine_seconds']:.2f}s, "
          f"basis {timings['basis_seconds']:.2f}s, "
          f"coarse {timings['coarse_seconds']:.2f}s, "
          f"total {timings['total_seconds']:.2f}s")


def cmd_solve(args: argparse.Namespace) -> int:
    config = _config_from(args)
    if args.server:
        data = _post(args.server, "/solve", {"config": config.model_dump(mode="json")})
        _print_report(data["report"], data["timings"])
        _write_artifacts(config.out_dir, data["artifacts"])
        return 0
    out = run_solve(config)
    _print_report(asdict(out.result.report), asdict(out.result.timings))
    for path in out.paths.values():
        print(f"wrote {path}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from(args)
    if args.server:
        data = _post(args.server, "/sweep", {
            "config": config.model_dump(mode="json"),
            "axis": args.axis, "values": args.values})
        rows = data["rows"]
        _write_artifacts(config.out_dir, data["artifacts"])
    else:
        table, paths = run_sweep(config, args.axis, args.values)
        rows = [asdict(row) for row in table.rows]
        for path in paths.values():
            print(f"wrote {path}")

    print(f"{'parameter':>12}  {'e_L2':>13}  {'e_L2_sq':>13}  {'e_energy':>13}  "
          f"{'seconds':>9}")
    for row in rows:
        # failed rows arrive as NaN locally and as null over the wire
        e2, sq, en = (float("nan") if row[k] is None else row[k]
                      for k in ("e_L2", "e_L2_sq", "e_energy"))
        print(f"{row['parameter']:>12.6g}  {e2:>13.6e}  {sq:>13.6e}  "
              f"{en:>13.6e}  {row['seconds']:>9.3f}")
    failed = [row for row in rows if row.get("error")]
    for row in failed:
        print(f"row {row['parameter']:g} failed: {row['error']}", file=sys.stderr)
    return 0 if len(failed) < len(rows) else 3


def cmd_basis(args: argparse.Namespace) -> int:
    config = _config_from(args)
    if args.server:
        data = _post(args.server, "/basis", {
            "config": config.model_dump(mode="json"),
            "block": args.block, "region": args.region})
        print(f"block {data['block']}  region {data['region']}  "
              f"layers {data['layers']}  energy {data['energy']:.6e}")
        profile = data["profile"]
        _write_artifacts(config.out_dir, data["artifacts"])
    else:
        out = run_basis(config, args.block, args.region)
        print(f"block {out.basis.block}  region {out.basis.region}  "
              f"layers {out.basis.layers}  energy {out.basis.energy:.6e}")
        profile = out.profile
        for path in out.paths.values():
            print(f"wrote {path}")
    print("energy fraction outside ring r:")
    for r, frac in enumerate(profile):
        print(f"  r={r}: {frac:.6e}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    if args.server:
        data = _post(args.server, "/validate", {"perturb_stiffness": args.perturb})
        checks = data["checks"]
    else:
        checks = [asdict(c) for c in run_validate(args.perturb)]
    for check in checks:
        state = "PASS" if check["passed"] else "FAIL"
        print(f"{state}  {check['name']}: {check['detail']}")
    return 0 if all(check["passed"] for check in checks) else 3


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NLMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
