"""
ffg MCP tools implementation.
This file exposes the experiment harness and a few quick calculations as tools.
"""

import asyncio
import json
from typing import Any, Dict, Optional

import numpy as np

from ..analytic_example import MonoParams, rwa_target
from ..config import NumericsSettings, load_config, numerics_from_config
from ..errors import ConfigError, FfgError
from ..harness import ExperimentConfig, run, sweet_spot_residual, sweet_spot_solve
from ..magnus import correction_loop
from ..ncft import ncft_monochromatic, synth_drive

# Import these at the end to avoid circular imports
from ..server import Context, mcp


def _numerics(ctx: Context) -> NumericsSettings:
    """Numerical settings from the lifespan context, or freshly loaded."""
    try:
        config = ctx.request_context.lifespan_context.config
    except (AttributeError, ValueError):
        config = load_config()
    return numerics_from_config(config)


async def _report_error(ctx: Context, e: Exception) -> Dict[str, Any]:
    if isinstance(e, ConfigError):
        result: Dict[str, Any] = {"error": str(e), "field": e.field}
    elif isinstance(e, FfgError):
        result = {"error": str(e)}
    else:
        result = {"error": f"Unexpected failure: {str(e)}"}
    await ctx.error(result["error"])
    return result


@mcp.tool()
async def ffg_run_experiment(
    config: Dict[str, Any],
    threads: int = 1,
    out: Optional[str] = None,
    ctx: Context = None,
) -> Dict[str, Any]:
    """
    Run a harness experiment and return its result table.

    Args:
        config: Experiment config object, same schema as `ffg run` files
        threads: Worker threads for sweep points
        out: Optional directory for the CSV and metadata files
        ctx: The Context object (automatically injected)

    Returns:
        Columns and metadata of the result table
    """
    try:
        experiment = ExperimentConfig.from_mapping(config, _numerics(ctx))
        await ctx.info(f"Running {experiment.experiment}")
        table = await asyncio.to_thread(run, experiment, threads, out)
    except Exception as e:
        return await _report_error(ctx, e)

    await ctx.info(f"{experiment.experiment} finished with {table.rows} rows")
    return {"columns": table.columns, "metadata": table.metadata}


@mcp.tool()
async def ffg_validate_config(config: Dict[str, Any], ctx: Context = None) -> Dict[str, Any]:
    """
    Validate an experiment config and return it with every default filled in.

    Args:
        config: Experiment config object
        ctx: The Context object (automatically injected)

    Returns:
        {"valid": True, "resolved": {...}} or an error with the offending field
    """
    try:
        experiment = ExperimentConfig.from_mapping(config, _numerics(ctx))
    except Exception as e:
        return await _report_error(ctx, e)
    return {"valid": True, "resolved": experiment.to_dict()}


@mcp.tool()
async def ffg_sweet_spot(lo: float = 1.0, hi: float = 2.0, ctx: Context = None) -> Dict[str, Any]:
    """
    Smallest coherent amplitude in [lo, hi] with tan(alpha^2) = -tanh(alpha^2).

    Args:
        lo: Lower end of the search bracket
        hi: Upper end of the search bracket
        ctx: The Context object (automatically injected)

    Returns:
        The root and the residual of the condition there
    """
    try:
        alpha = sweet_spot_solve(lo, hi)
    except Exception as e:
        return await _report_error(ctx, e)
    await ctx.info(f"Sweet spot at alpha = {alpha:.10f}")
    return {"alpha": alpha, "residual": float(sweet_spot_residual(alpha))}


@mcp.tool()
async def ffg_target_spectrum(
    n_sym: int = 2,
    beta: float = 0.5,
    lam: float = 2.5,
    n_fock: int = 60,
    levels: int = 10,
    ctx: Context = None,
) -> Dict[str, Any]:
    """
    Lowest eigenvalues of the time-averaged Hamiltonian of beta cos(x + n Omega t).

    Args:
        n_sym: Rotational symmetry order n
        beta: Drive amplitude
        lam: Dimensionless Planck constant
        n_fock: Fock truncation
        levels: Number of eigenvalues to return
        ctx: The Context object (automatically injected)

    Returns:
        Eigenvalues in ascending order and the spectrum's pairing error
    """
    try:
        params = MonoParams(n_sym=n_sym, beta=beta, lam=lam).to_system(n_fock)
        energies = np.linalg.eigvalsh(rwa_target(params))
    except Exception as e:
        return await _report_error(ctx, e)
    pairing = float(np.max(np.abs(energies + energies[::-1])))
    await ctx.info(f"Diagonalized a {n_fock}-level target")
    return {"energies": energies[:levels].tolist(), "pairing_error": pairing}


@mcp.tool()
async def ffg_drive_lines(
    n_sym: int = 2,
    beta: float = 0.5,
    lam: float = 2.5,
    omega: float = 1.0,
    t0: float = 0.0,
    correction: bool = False,
    n_fock: int = 40,
    ctx: Context = None,
) -> Dict[str, Any]:
    """
    Real-space lattice lines of the monochromatic drive and, optionally, its
    first-order correction.

    Args:
        n_sym: Rotational symmetry order n
        beta: Drive amplitude
        lam: Dimensionless Planck constant
        omega: Floquet frequency
        t0: Initial reference time
        correction: Also return the first-order correction drive
        n_fock: Fock truncation used to form the Magnus term
        ctx: The Context object (automatically injected)

    Returns:
        Lines of the bare drive, plus amplitude and phase of the correction at t0
    """
    try:
        params = MonoParams(n_sym, beta, lam, omega, t0).to_system(n_fock)
        numerics = _numerics(ctx).with_overrides(n_fock=n_fock)
        target = ncft_monochromatic(params)
        result: Dict[str, Any] = {"lines": json.loads(synth_drive(target, params).to_json())}
        if correction:
            await ctx.info("Building the first-order correction drive")
            stack = await asyncio.to_thread(
                correction_loop, target, 1, params, numerics, "analytic"
            )
            spec = synth_drive(stack.orders[1], params, numerics)
            result["correction"] = {
                "k": spec.k.tolist(),
                "weights": spec.weights.tolist(),
                "amplitude": spec.amplitude(t0).tolist(),
                "phase": spec.phase(t0).tolist(),
            }
    except Exception as e:
        return await _report_error(ctx, e)
    return result
