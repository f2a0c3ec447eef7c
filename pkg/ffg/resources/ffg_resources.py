"""
ffg MCP resources implementation.
This file contains reference resources describing experiments and parameters.
"""

import json

from ..config import NumericsSettings
from ..fockspace import SystemParams
from ..harness import DEFAULT_OPTIONS, DEFAULT_PARAMS, EXPERIMENTS, SWEEP_VARIABLES

# Import these at the end to avoid circular imports
from ..server import mcp


@mcp.resource("ffg://experiments")
def ffg_experiments_resource() -> str:
    """
    Resource listing the harness experiments, their sweeps and default options.

    Returns:
        Experiment catalogue formatted as markdown
    """
    sections = []
    for name in EXPERIMENTS:
        sweep = SWEEP_VARIABLES.get(name)
        sections.append(
            f"""
    ## {name}

    - **sweep variable**: {sweep or "none"}
    - **default options**: `{json.dumps(DEFAULT_OPTIONS[name], sort_keys=True)}`
    - **parameter defaults**: `{json.dumps(DEFAULT_PARAMS.get(name, {}), sort_keys=True)}`
    """
        )
    return (
        """
    # ffg Experiments

    Run any of these with `ffg_run_experiment(config)` or `ffg run config.json`.
    A config is a JSON object with the keys `experiment`, `params`, `options`,
    `sweep`, `output` and `numerics`; only `experiment` is required.

    ```
    {"experiment": "correction_scan",
     "params": {"n_sym": 2, "lam": 2.5},
     "sweep": {"variable": "beta", "start": 0.05, "stop": 0.6, "points": 12}}
    ```
    """
        + "".join(sections)
    )


@mcp.resource("ffg://parameters")
def ffg_parameters_resource() -> str:
    """
    Resource describing the physical parameters and numerical settings.

    Returns:
        Parameter reference formatted as markdown
    """
    return f"""
    # ffg Parameters

    ## Physical parameters (`params`)

    - **lam**: Dimensionless Planck constant, [x, p] = i lam
    - **omega**: Floquet frequency in units of the oscillator frequency
    - **n_sym**: Resonance integer, drive frequency n_sym * omega
    - **beta**: Drive amplitude
    - **t0**: Initial reference time in [0, 2 pi / omega)
    - **n_fock**: Fock truncation dimension
    - **detuning**: Rotating-frame detuning, zero on resonance

    Defaults: `{json.dumps(SystemParams().to_dict(), sort_keys=True)}`

    ## Numerical settings (`numerics`)

    Override per experiment or through `FFG_NUMERICS__<NAME>` variables.

    Defaults: `{json.dumps(NumericsSettings().to_dict(), sort_keys=True)}`

    Comparisons against closed forms use the trusted block: the first
    `n_fock - trust_margin` Fock levels.
    """
