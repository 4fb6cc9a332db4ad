"""Command-line interface for Multicell Tools."""

import logging
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np
import pandas as pd

from multicell_tools import __version__
from multicell_tools.allocation import (
    allocation_oracle_grid,
    kkt_residual,
    optimal_allocation,
    sum_rate,
)
from multicell_tools.bounds import EnsembleOptions, GapEnsemble, nnc_region
from multicell_tools.cellular import (
    cdf_frame,
    improvement_table,
    percentile_rate,
    prepare_drops,
    run_campaign,
    sweep_backhaul,
)
from multicell_tools.config import SimConfig, load_config
from multicell_tools.network import NetworkInstance, load_instance, make_symmetric_two_user
from multicell_tools.rates import (
    DecodingOrder,
    QuantizationProfile,
    RegionOptions,
    best_decoding_order,
    decoding_stage_table,
    effective_sinrs_wz,
    rate_curve,
    region_table,
    two_user_region,
)
from multicell_tools.utils import (
    db_to_linear,
    format_bits,
    format_capacity,
    format_mbps,
    parse_float_list,
    write_frame,
)
from multicell_tools.verify import VerifyOptions, run_verification

logger = logging.getLogger(__name__)

EXIT_VERIFICATION_FAILED = 2
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


class MulticellGroup(click.Group):
    """Click group that reports usage errors with exit code 1."""

    def make_context(
        self,
        info_name: Optional[str],
        args: list[str],
        parent: Optional[click.Context] = None,
        **extra: Any,
    ) -> click.Context:
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = 1
            raise

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = 1
            raise


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def _emit(frame: pd.DataFrame, out: Optional[str]) -> None:
    """Write a table to a file, or to stdout when no file is given."""
    text = write_frame(frame, out)
    if out is None:
        click.echo(text, nl=False)
    else:
        click.echo(f"Wrote {len(frame)} rows to {out}", err=True)


def _load_sim_config(config: Optional[str], **overrides: Any) -> SimConfig:
    cfg = load_config(config) if config else SimConfig()
    changes = {key: value for key, value in overrides.items() if value is not None}
    return cfg.replace(**changes) if changes else cfg


@click.group(cls=MulticellGroup)
@click.version_option(version=__version__)
@click.option("--verbose", "-v", count=True, help="Log progress (-v) or details (-vv) to stderr")
def main(verbose: int) -> None:
    """Multicell Tools - uplink rates for multicell joint processing over finite backhaul."""
    _configure_logging(verbose)


@main.command(name="rk-curve")
@click.option("--sinr-db", type=float, default=20.0, help="Effective SINR in dB (default: 20)")
@click.option("--c-max", type=float, default=8.0, help="Largest backhaul in bits (default: 8)")
@click.option("--step", type=float, default=0.05, help="Backhaul step in bits (default: 0.05)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output CSV file")
def rk_curve(sinr_db: float, c_max: float, step: float, out: Optional[str]) -> None:
    """Rate of one user against its backhaul capacity, with the half-bit point marked."""
    if step <= 0 or c_max < 0:
        raise click.BadParameter("--step must be positive and --c-max non-negative")

    sinr = float(db_to_linear(sinr_db))
    points = max(int(round(c_max / step)), 1)
    curve = rate_curve(sinr, np.linspace(0.0, c_max, points + 1))

    frame = pd.DataFrame(
        {
            "C_bits": curve.capacities,
            "rate_bits": curve.rates,
            "sic_limit_bits": curve.limit,
            "marker": "",
        }
    )
    c_half, r_half = curve.corner_point
    frame.loc[len(frame)] = [c_half, r_half, curve.limit, "half-bit"]
    frame = frame.sort_values("C_bits", kind="stable", ignore_index=True)
    click.echo(
        f"half-bit point: C={format_bits(c_half)}, gap={format_bits(curve.half_bit_gap)}",
        err=True,
    )
    _emit(frame, out)


@main.command()
@click.option("--snr-db", type=float, default=30.0, help="Direct-link SNR in dB (default: 30)")
@click.option("--inr-db", type=float, default=20.0, help="Cross-link INR in dB (default: 20)")
@click.option(
    "--backhaul-bits", type=float, default=5.0, help="Backhaul per base-station (default: 5)"
)
@click.option(
    "--scheme",
    "schemes",
    type=click.Choice(["wz", "nowz", "joint", "baseline"], case_sensitive=False),
    multiple=True,
    help="Schemes to include (default: all four). Can be specified multiple times.",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output CSV file")
def region(
    snr_db: float,
    inr_db: float,
    backhaul_bits: float,
    schemes: tuple[str, ...],
    out: Optional[str],
) -> None:
    """Two-user symmetric rate regions of the decoding schemes."""
    if backhaul_bits < 0:
        raise click.BadParameter("--backhaul-bits cannot be negative")

    options = RegionOptions(snr_db=snr_db, inr_db=inr_db, backhaul_bits=backhaul_bits)
    if schemes:
        options.schemes = tuple(s.lower() for s in schemes)

    snr, inr = float(db_to_linear(snr_db)), float(db_to_linear(inr_db))
    for scheme in options.schemes:
        total = two_user_region(scheme, snr, inr, backhaul_bits).sum_rate
        click.echo(f"{scheme}: sum rate {format_bits(total)}", err=True)
    _emit(region_table(options), out)


@main.command(name="wyner-gap")
@click.option("--seed", type=int, default=0, help="Random seed (default: 0)")
@click.option("--trials", type=int, default=10000, help="Number of instances (default: 10000)")
@click.option(
    "--users", "-L", type=int, default=None, help="Users per instance (default: random 1..8)"
)
@click.option(
    "--scheme",
    type=click.Choice(["wz", "nowz"], case_sensitive=False),
    default="wz",
    help="Scheme to certify (default: wz)",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Per-trial CSV file")
@click.pass_context
def wyner_gap(
    ctx: click.Context,
    seed: int,
    trials: int,
    users: Optional[int],
    scheme: str,
    out: Optional[str],
) -> None:
    """Certify the constant gap to the cut-set bound on random Wyner instances."""
    try:
        options = EnsembleOptions(trials=trials, L=users, scheme=scheme.lower(), seed=seed)
        summary = GapEnsemble(options).run()
    except ValueError as e:
        raise click.BadParameter(str(e))

    click.echo(summary.to_text())
    if out is not None:
        write_frame(summary.to_frame(), out)
    if not summary.passed:
        ctx.exit(EXIT_VERIFICATION_FAILED)


def _instance_or_symmetric(
    instance: Optional[str], snr_db: float, inr_db: float, backhaul_bits: float
) -> NetworkInstance:
    if instance is not None:
        return load_instance(instance)
    return make_symmetric_two_user(
        float(db_to_linear(snr_db)), float(db_to_linear(inr_db)), backhaul_bits
    )


@main.command()
@click.option(
    "--instance", type=click.Path(exists=True, dir_okay=False), default=None, help="Instance file"
)
@click.option("--snr-db", type=float, default=30.0, help="Symmetric SNR in dB (default: 30)")
@click.option("--inr-db", type=float, default=20.0, help="Symmetric INR in dB (default: 20)")
@click.option(
    "--backhaul-bits", type=float, default=5.0, help="Symmetric backhaul in bits (default: 5)"
)
@click.option("--q", "q_level", type=float, default=None, help="Quantization noise (default: N0)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output CSV file")
def nnc(
    instance: Optional[str],
    snr_db: float,
    inr_db: float,
    backhaul_bits: float,
    q_level: Optional[float],
    out: Optional[str],
) -> None:
    """Joint-decoding (noisy network coding) region constraints for every user subset."""
    try:
        net = _instance_or_symmetric(instance, snr_db, inr_db, backhaul_bits)
        level = net.noise if q_level is None else q_level
        result = nnc_region(net, QuantizationProfile(q=np.full(net.L, level)))
    except ValueError as e:
        click.echo(f"Error: {e}", err=True)
        raise click.Abort()
    _emit(result.to_frame(), out)


@main.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--c-total", type=float, required=True, help="Total backhaul budget in bits")
@click.option("--order", type=str, default=None, help="Decoding order, 1-based (e.g. 3,2,1)")
@click.option(
    "--exhaustive-limit",
    type=int,
    default=40320,
    help="Largest L! searched exhaustively when --order is absent (default: 40320)",
)
@click.option(
    "--grid-step",
    type=float,
    default=None,
    help="Also run the grid oracle with this step (L <= 4)",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output CSV file")
def allocate(
    instance: str,
    c_total: float,
    order: Optional[str],
    exhaustive_limit: int,
    grid_step: Optional[float],
    out: Optional[str],
) -> None:
    """Water-fill a total backhaul budget over the base-stations of INSTANCE."""
    try:
        net = load_instance(instance)
        if order is not None:
            decoding = DecodingOrder.parse(order)
        else:
            decoding, _ = best_decoding_order(net, "wz", exhaustive_limit)
        alloc = optimal_allocation(net, decoding, c_total)
        sinr = effective_sinrs_wz(net, decoding)

        click.echo(f"order={decoding}", err=True)
        click.echo(f"sum_rate={format_bits(sum_rate(sinr, alloc.c), 6)}", err=True)
        click.echo(f"kkt_residual={kkt_residual(net, decoding, alloc):.3e}", err=True)
        if grid_step is not None:
            grid = allocation_oracle_grid(net, decoding, c_total, grid_step)
            gap = sum_rate(sinr, alloc.c) - sum_rate(sinr, grid.c)
            click.echo(f"grid_gap={format_bits(gap, 6)}", err=True)
        if logger.isEnabledFor(logging.DEBUG):
            table = decoding_stage_table(net.with_backhaul(alloc.c), decoding)
            logger.debug("Stage table:\n%s", table.to_string(index=False))
    except (FileNotFoundError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        raise click.Abort()
    _emit(alloc.to_frame(), out)


_CONFIG_OPTION = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None, help="key=value file"
)
_OUT_DIR_OPTION = click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=".",
    help="Output directory (default: current directory)",
)


@main.command()
@_CONFIG_OPTION
@_OUT_DIR_OPTION
@click.option(
    "--scheme",
    type=click.Choice(["baseline", "wz", "nowz"], case_sensitive=False),
    default=None,
    help="Run the baseline and this scheme only (default: all three)",
)
@click.option(
    "--alloc",
    type=click.Choice(["uniform", "optimized"], case_sensitive=False),
    default=None,
    help="Backhaul split across tones (default: from config)",
)
@click.option("--backhaul-mbps", type=str, default=None, help="Backhaul per site, or inf")
@click.option("--seed", type=int, default=None, help="Master seed (default: from config)")
@click.option("--drops", type=int, default=None, help="Number of drops (default: from config)")
def simulate(
    config: Optional[str],
    out: str,
    scheme: Optional[str],
    alloc: Optional[str],
    backhaul_mbps: Optional[str],
    seed: Optional[int],
    drops: Optional[int],
) -> None:
    """Run the OFDMA campaign and write cdf.csv and summary.csv."""
    try:
        cfg = _load_sim_config(
            config,
            allocation=alloc.lower() if alloc else None,
            backhaul_per_bs_mbps=parse_float_list(backhaul_mbps)[0] if backhaul_mbps else None,
            seed=seed,
            drops=drops,
        )
        schemes = ["baseline", "nowz", "wz"]
        if scheme is not None:
            schemes = sorted({"baseline", scheme.lower()}, key=schemes.index)

        # Common drops for every scheme
        prepared = prepare_drops(cfg)
        results = [run_campaign(cfg.replace(scheme=name), prepared) for name in schemes]
    except (FileNotFoundError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        raise click.Abort()

    out_dir = Path(out)
    write_frame(cdf_frame(results), out_dir / "cdf.csv")
    write_frame(improvement_table(results, results[0]), out_dir / "summary.csv")
    for result in results:
        click.echo(
            f"{result.scheme}: {format_mbps(result.mean_percell_mbps)} per cell, "
            f"median user {format_mbps(percentile_rate(result, 50.0))}"
        )
    click.echo(f"Wrote {out_dir / 'cdf.csv'} and {out_dir / 'summary.csv'}")


@main.command(name="sweep-backhaul")
@_CONFIG_OPTION
@_OUT_DIR_OPTION
@click.option(
    "--backhaul",
    type=str,
    default="60,120,180,240,360,inf",
    help="Comma-separated backhaul per site in Mbps (default: 60,120,180,240,360,inf)",
)
@click.option(
    "--alloc",
    "allocations",
    type=click.Choice(["uniform", "optimized"], case_sensitive=False),
    multiple=True,
    help="Allocation modes (default: both). Can be specified multiple times.",
)
@click.option("--seed", type=int, default=None, help="Master seed (default: from config)")
@click.option("--drops", type=int, default=None, help="Number of drops (default: from config)")
def sweep_backhaul_cmd(
    config: Optional[str],
    out: str,
    backhaul: str,
    allocations: tuple[str, ...],
    seed: Optional[int],
    drops: Optional[int],
) -> None:
    """Per-cell sum rate against backhaul, written to sweep.csv."""
    try:
        cfg = _load_sim_config(config, seed=seed, drops=drops)
        levels = parse_float_list(backhaul)
        modes = tuple(a.lower() for a in allocations) or ("uniform", "optimized")
        table = sweep_backhaul(cfg, levels, modes)
    except (FileNotFoundError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        raise click.Abort()

    path = Path(out) / "sweep.csv"
    write_frame(table, path)
    for row in table.itertuples(index=False):
        level = format_capacity(row.backhaul_per_bs_mbps)
        click.echo(f"{row.allocation} {level} Mbps: {format_mbps(row.mean_percell_mbps)} per cell")
    click.echo(f"Wrote {path}")


@main.command()
@click.option("--seed", type=int, default=2011, help="Seed of the randomized suites")
@click.option("--quick", is_flag=True, help="Run one tenth of the randomized trials")
@click.option("--campaign", is_flag=True, help="Also run the OFDMA campaign suite (slow)")
@_CONFIG_OPTION
@click.pass_context
def verify(
    ctx: click.Context, seed: int, quick: bool, campaign: bool, config: Optional[str]
) -> None:
    """Run the property suites; exits with status 2 if any check fails."""
    try:
        cfg = load_config(config) if config else None
    except (FileNotFoundError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        raise click.Abort()

    report = run_verification(VerifyOptions(seed=seed, quick=quick, campaign=campaign, config=cfg))
    click.echo(report.to_text())
    if not report.passed:
        ctx.exit(EXIT_VERIFICATION_FAILED)


if __name__ == "__main__":
    main()
