"""
ffg MCP prompts implementation.
This file contains prompt templates for common Floquet engineering tasks.
"""

# Import these at the end to avoid circular imports
from ..server import mcp


@mcp.prompt()
def ffg_reproduce_figure(experiment: str) -> str:
    """
    Prompt for running a harness experiment and summarizing its data.

    Args:
        experiment: Experiment name, e.g. correction_scan or cat_infidelity

    Returns:
        A formatted prompt for running and interpreting the experiment
    """
    return f"""
    # Reproduce a Floquet Engineering Result

    Please run the **{experiment}** experiment and explain what it shows.

    ## Tasks to Complete:

    1. **Check the experiment** in the `ffg://experiments` resource and build a
       config; validate it with `ffg_validate_config()` first
    2. **Run it** with `ffg_run_experiment()`
    3. **Summarize the table**:
       - For scans over beta, compare the uncorrected (`orig`) and corrected
         (`1st`) columns level by level
       - For `cat_infidelity`, report the fitted slopes from the metadata
       - For `spectrum`, check that the eigenvalues pair up about zero

    ## Available Tools:

    - `ffg_validate_config()` - Resolve defaults and check a config
    - `ffg_run_experiment()` - Run an experiment
    - `ffg_sweet_spot()` - Cat amplitude satisfying tan a^2 = -tanh a^2
    - `ffg_target_spectrum()` - Quick spectrum of the monochromatic target

    Please start by validating the config.
    """


@mcp.prompt()
def ffg_engineer_target(n_sym: int = 2, beta: float = 0.5) -> str:
    """
    Prompt for designing a drive and its first-order correction.

    Args:
        n_sym: Rotational symmetry order of the target
        beta: Drive amplitude

    Returns:
        A formatted prompt for the drive design workflow
    """
    return f"""
    # Engineer a Rotationally Symmetric Floquet Hamiltonian

    **Target**: {n_sym}-fold symmetric lattice from the drive beta cos(x + n Omega t)
    with beta = {beta}.

    ## Tasks to Complete:

    1. **Inspect the target** with `ffg_target_spectrum(n_sym={n_sym}, beta={beta})`
    2. **Get the drive lines** with `ffg_drive_lines(n_sym={n_sym}, beta={beta}, correction=True)`
       and describe the correction: the wavenumbers it occupies and its amplitude
    3. **Judge the correction** by running a `correction_scan` around beta = {beta}
       and comparing quasienergy errors and fidelities with and without it
    4. **Show the ground state** with a `state_profile` run at beta = {beta} and
       compare the Fock amplitudes of both drives with the target eigenstate

    Please start with the target spectrum.
    """
