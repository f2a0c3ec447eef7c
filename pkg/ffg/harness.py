"""
Experiment harness: validated experiment configs, parameter sweeps and
plot-ready CSV + JSON output.

Each experiment maps a resolved ExperimentConfig to a ResultTable. Sweep
points are computed concurrently; tables are assembled in sweep order so the
CSV body depends on the config alone.
"""

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from . import __version__
from .analytic_example import rwa_q_exact, rwa_target
from .config import NumericsSettings
from .errors import ConfigError, ConvergenceError, DomainError, TruncationWarning
from .floquet_solver import (
    QuasienergySolution,
    amplitude_profile_delta,
    fidelity_cats,
    fold_quasienergy,
    identify_levels,
    micromotion,
    propagator,
    quasienergy_solve,
    state_fidelity,
    target_levels,
    track_levels,
)
from .fockspace import (
    FockOperator,
    SystemParams,
    cat_lattice_target,
    cat_state,
    parity_operator,
    qfunction,
)
from .magnus import DriveStack, correction_loop
from .ncft import (
    FrameSeries,
    build_frame_series,
    cat_lattice_k_c,
    cat_lattice_q_exact,
    drive_chart,
    ncft_cat_lattice,
    ncft_monochromatic,
    quadrature_check,
)

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "spectrum",
    "q_chart",
    "correction_scan",
    "state_profile",
    "t0_scan",
    "micromotion_scan",
    "cat_infidelity",
    "sweet_spot",
    "drive_chart",
)

# experiments that need a sweep, and the variable they sweep
SWEEP_VARIABLES = {
    "correction_scan": "beta",
    "t0_scan": "t0",
    "micromotion_scan": "t",
    "cat_infidelity": "beta",
}

TRACKED_LEVELS = 4
SWEET_SPOT_TOL = 1e-10

_CAT_OPTIONS = {"q": 4, "alpha0": 1.198, "gamma": 0.25}

DEFAULT_OPTIONS: Dict[str, Dict[str, Any]] = {
    "spectrum": {"target": "mono", **_CAT_OPTIONS},
    "q_chart": {"target": "mono", "extent": 6.0, "points": 41, **_CAT_OPTIONS},
    "correction_scan": {"levels": TRACKED_LEVELS},
    "state_profile": {"level": 0},
    "t0_scan": {"levels": TRACKED_LEVELS},
    "micromotion_scan": {"levels": TRACKED_LEVELS},
    "cat_infidelity": {**_CAT_OPTIONS, "alpha": None, "orders": [0, 1]},
    "sweet_spot": {"lo": 1.0, "hi": 2.0},
    "drive_chart": {
        **_CAT_OPTIONS,
        "k_points": 61,
        "tau_points": 64,
        "k_ratio_max": 3.0,
    },
}

# parameter defaults that differ from SystemParams for the lattice experiments
DEFAULT_PARAMS: Dict[str, Dict[str, Any]] = {
    "cat_infidelity": {"lam": 0.25, "n_fock": 120},
    "drive_chart": {"lam": 0.25, "n_fock": 120},
}


@dataclass(frozen=True)
class SweepSpec:
    """
    A one-dimensional parameter sweep.

    Attributes:
        variable: Swept quantity ("beta", "t0" or "t")
        start: First value
        stop: Last value (excluded when endpoint is False)
        points: Number of values, at least 2
        log: Geometric instead of linear spacing
        endpoint: Include stop
    """

    variable: str
    start: float
    stop: float
    points: int
    log: bool = False
    endpoint: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ConfigError("bounds must be finite", "sweep")
        if isinstance(self.points, bool) or not isinstance(self.points, int):
            raise ConfigError("must be an integer", "sweep.points")
        if self.points < 2:
            raise ConfigError("must be at least 2", "sweep.points")
        if self.log and (self.start <= 0 or self.stop <= 0):
            raise ConfigError("log spacing needs positive bounds", "sweep")

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.start, self.stop, self.points, endpoint=self.endpoint)
        return np.linspace(self.start, self.stop, self.points, endpoint=self.endpoint)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SweepSpec":
        known = {"variable", "start", "stop", "points", "log", "endpoint"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", "sweep")
        missing = sorted({"variable", "start", "stop", "points"} - set(data))
        if missing:
            raise ConfigError(f"missing keys {missing}", "sweep")
        try:
            return cls(
                variable=str(data["variable"]),
                start=float(data["start"]),
                stop=float(data["stop"]),
                points=data["points"],
                log=bool(data.get("log", False)),
                endpoint=bool(data.get("endpoint", True)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), "sweep") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variable": self.variable,
            "start": self.start,
            "stop": self.stop,
            "points": self.points,
            "log": self.log,
            "endpoint": self.endpoint,
        }


def default_sweep(experiment: str, params: SystemParams) -> Optional[SweepSpec]:
    """Sweep used when a config names none."""
    if experiment == "correction_scan":
        return SweepSpec("beta", 0.05, 0.6, 12)
    if experiment == "cat_infidelity":
        return SweepSpec("beta", 0.02, 0.2, 8, log=True)
    if experiment == "t0_scan":
        return SweepSpec("t0", 0.0, params.period, 16, endpoint=False)
    if experiment == "micromotion_scan":
        return SweepSpec("t", 0.0, params.period, 64, endpoint=False)
    return None


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A fully resolved experiment description.

    Attributes:
        experiment: One of EXPERIMENTS
        params: System parameters with the config overlay applied
        options: Experiment-specific options, defaults filled in
        sweep: Parameter sweep, None for single-shot experiments
        output: Output path prefix
        numerics: Numerical settings
    """

    experiment: str
    params: SystemParams
    options: Dict[str, Any] = field(default_factory=dict)
    sweep: Optional[SweepSpec] = None
    output: str = "results"
    numerics: NumericsSettings = field(default_factory=NumericsSettings)

    @classmethod
    def from_mapping(
        cls, data: Mapping[str, Any], numerics: Optional[NumericsSettings] = None
    ) -> "ExperimentConfig":
        """
        Validate a config mapping and fill in every default.

        Args:
            data: Parsed JSON object
            numerics: Base numerical settings; data["numerics"] overlays them

        Returns:
            Resolved config

        Raises:
            ConfigError: Naming the offending field
        """
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        known = {"experiment", "params", "options", "sweep", "output", "numerics"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}")

        experiment = data.get("experiment")
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"must be one of {list(EXPERIMENTS)}", "experiment")

        base = (numerics or NumericsSettings()).to_dict()
        overlay = data.get("numerics") or {}
        if not isinstance(overlay, Mapping):
            raise ConfigError("must be an object", "numerics")
        numerics = NumericsSettings.from_mapping({**base, **overlay})

        raw_params = data.get("params") or {}
        if not isinstance(raw_params, Mapping):
            raise ConfigError("must be an object", "params")
        merged = {"n_fock": numerics.n_fock, **DEFAULT_PARAMS.get(experiment, {})}
        merged.update(raw_params)
        params = SystemParams.from_mapping(merged)
        numerics = _numerics_for(numerics, params.n_fock)

        options = _resolve_options(experiment, data.get("options") or {})

        sweep = None
        if experiment in SWEEP_VARIABLES:
            raw_sweep = data.get("sweep")
            if raw_sweep is None:
                sweep = default_sweep(experiment, params)
            elif isinstance(raw_sweep, Mapping):
                sweep = SweepSpec.from_mapping(raw_sweep)
            else:
                raise ConfigError("must be an object", "sweep")
            _check_sweep(experiment, sweep, params)
        elif data.get("sweep") is not None:
            raise ConfigError(f"experiment {experiment!r} takes no sweep", "sweep")

        output = data.get("output", experiment)
        if not isinstance(output, str) or not output:
            raise ConfigError("must be a non-empty string", "output")
        return cls(experiment, params, options, sweep, output, numerics)

    def with_overrides(
        self,
        n_fock: Optional[int] = None,
        m_max: Optional[int] = None,
        l_max: Optional[int] = None,
    ) -> "ExperimentConfig":
        """Apply command-line overrides, keeping the config valid."""
        params = self.params
        if n_fock is not None:
            try:
                params = params.replace(n_fock=n_fock)
            except DomainError as e:
                raise ConfigError(str(e), "params.n_fock") from e
        numerics = self.numerics.with_overrides(m_max=m_max, l_max=l_max)
        numerics = _numerics_for(numerics, params.n_fock)
        return ExperimentConfig(
            self.experiment, params, self.options, self.sweep, self.output, numerics
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "params": self.params.to_dict(),
            "options": dict(self.options),
            "sweep": self.sweep.to_dict() if self.sweep else None,
            "output": self.output,
            "numerics": self.numerics.to_dict(),
        }


def load_experiment(
    path: str, numerics: Optional[NumericsSettings] = None
) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e
    return ExperimentConfig.from_mapping(data, numerics)


def _numerics_for(numerics: NumericsSettings, n_fock: int) -> NumericsSettings:
    try:
        return numerics.with_overrides(n_fock=n_fock)
    except ConfigError as e:
        raise ConfigError(str(e), "params.n_fock") from e


def _resolve_options(experiment: str, raw: Any) -> Dict[str, Any]:
    if not isinstance(raw, Mapping):
        raise ConfigError("must be an object", "options")
    defaults = DEFAULT_OPTIONS[experiment]
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} for {experiment}", "options")
    options = {**defaults, **raw}

    def positive_int(name: str, minimum: int = 1) -> None:
        value = options[name]
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ConfigError(f"must be an integer >= {minimum}", f"options.{name}")

    def positive_float(name: str) -> None:
        value = options[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError("must be a positive number", f"options.{name}")

    if "target" in options and options["target"] not in ("mono", "cat"):
        raise ConfigError("must be 'mono' or 'cat'", "options.target")
    if "q" in options:
        positive_int("q", 2)
        positive_float("alpha0")
        positive_float("gamma")
    if "level" in options:
        positive_int("level", 0)
    for name in ("levels", "points", "k_points", "tau_points"):
        if name in options:
            positive_int(name, 2 if name != "levels" else 1)
    for name in ("extent", "k_ratio_max"):
        if name in options:
            positive_float(name)
    if experiment == "cat_infidelity":
        orders = options["orders"]
        if (
            not isinstance(orders, list)
            or not orders
            or any(o not in (0, 1, 2) for o in orders)
        ):
            raise ConfigError("must be a non-empty list drawn from 0, 1, 2", "options.orders")
        options["orders"] = sorted(set(orders))
        if options["alpha"] is not None:
            positive_float("alpha")
    if experiment == "sweet_spot":
        positive_float("lo")
        positive_float("hi")
        if options["lo"] >= options["hi"]:
            raise ConfigError("lo must be below hi", "options")
    return options


def _check_sweep(experiment: str, sweep: SweepSpec, params: SystemParams) -> None:
    expected = SWEEP_VARIABLES[experiment]
    if sweep.variable != expected:
        raise ConfigError(f"{experiment} sweeps {expected!r}", "sweep.variable")
    if expected == "t":
        return
    for value in sweep.values():
        try:
            params.replace(**{expected: float(value)})
        except DomainError as e:
            raise ConfigError(str(e), "sweep") from e


@dataclass
class ResultTable:
    """
    Named columns of reals plus a metadata record.

    Attributes:
        columns: Column name to values, all of equal length
        metadata: Config echo, code version, timestamps and summaries
    """

    columns: Dict[str, List[float]]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        lengths = {len(values) for values in self.columns.values()}
        if len(lengths) > 1:
            raise DomainError(f"columns have unequal lengths {sorted(lengths)}")
        self.columns = {
            name: [float(v) for v in values] for name, values in self.columns.items()
        }

    @property
    def rows(self) -> int:
        return len(next(iter(self.columns.values()), []))

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name])

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        names = list(self.columns)
        writer.writerow(names)
        for i in range(self.rows):
            writer.writerow([repr(self.columns[name][i]) for name in names])
        return buffer.getvalue()

    def write(self, prefix: str) -> Tuple[Path, Path]:
        """Write <prefix>.csv and <prefix>.meta.json."""
        csv_path = Path(f"{prefix}.csv")
        meta_path = Path(f"{prefix}.meta.json")
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(self.to_csv())
        meta_path.write_text(json.dumps(self.metadata, indent=2, sort_keys=True))
        return csv_path, meta_path

    @classmethod
    def read(cls, prefix: str) -> "ResultTable":
        with open(f"{prefix}.csv", newline="") as f:
            rows = list(csv.reader(f))
        names = rows[0] if rows else []
        columns = {name: [float(row[i]) for row in rows[1:]] for i, name in enumerate(names)}
        metadata = json.loads(Path(f"{prefix}.meta.json").read_text())
        return cls(columns, metadata)


def sweet_spot_residual(alpha: Any) -> Any:
    """g(alpha) = tan(alpha^2) + tanh(alpha^2)."""
    a2 = np.square(alpha)
    return np.tan(a2) + np.tanh(a2)


def sweet_spot_solve(lo: float, hi: float, tol: float = SWEET_SPOT_TOL) -> float:
    """
    Smallest root of tan(alpha^2) = -tanh(alpha^2) in [lo, hi].

    The bracket is split at the poles of tan(alpha^2); on every branch g rises
    from -inf to +inf, so each branch holds at most one root and bisection runs
    on the first branch segment showing a sign change.

    Raises:
        DomainError: If no branch inside the bracket changes sign
    """
    if not (0 <= lo < hi and math.isfinite(hi)):
        raise DomainError(f"invalid bracket [{lo}, {hi}]")
    first = math.ceil((lo**2 - math.pi / 2) / math.pi)
    last = math.floor((hi**2 - math.pi / 2) / math.pi)
    poles = [math.sqrt(math.pi / 2 + j * math.pi) for j in range(max(first, 0), last + 1)]
    edges = [lo, *poles, hi]
    margin = 1e-9
    for left, right in zip(edges[:-1], edges[1:]):
        a = left + margin if left in poles else left
        b = right - margin if right in poles else right
        if a >= b:
            continue
        ga, gb = sweet_spot_residual(a), sweet_spot_residual(b)
        if ga == 0:
            return float(a)
        if ga * gb < 0:
            root = optimize.bisect(sweet_spot_residual, a, b, xtol=tol * 1e-2)
            logger.info("sweet spot at alpha = %.12f", root)
            return float(root)
    raise DomainError(f"tan(a^2) + tanh(a^2) has no sign change in [{lo}, {hi}]")


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """
    Least-squares fit of log y = slope log x + intercept.

    Points with non-positive x or y are dropped.

    Returns:
        (slope, intercept)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if np.count_nonzero(keep) < 2:
        raise DomainError("a power-law fit needs two positive points")
    slope, intercept = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope), float(intercept)


def _map_points(func: Callable[[float], Any], values: Sequence[float], threads: int) -> List[Any]:
    """Evaluate func at every sweep value; results come back in sweep order."""
    if threads <= 1:
        return [func(float(v)) for v in values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda v: func(float(v)), values))


def _target_operator(config: ExperimentConfig) -> FockOperator:
    params, options = config.params, config.options
    if options["target"] == "cat":
        return cat_lattice_target(
            options["q"], options["alpha0"], options["gamma"], params.beta, params.n_fock
        )
    return rwa_target(params)


def _run_spectrum(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    target = _target_operator(config)
    energies = np.linalg.eigvalsh(target)
    summary = {"pairing_error": float(np.max(np.abs(energies + energies[::-1])))}
    options = config.options
    order = options["q"] if options["target"] == "cat" else config.params.n_sym
    if order % 2 == 0:
        # an even rotational order contains the rotation by pi
        parity = parity_operator(config.params.n_fock)
        summary["parity_error"] = float(np.max(np.abs(target @ parity - parity @ target)))
    columns = {"index": list(range(energies.size)), "energy": energies}
    return columns, summary


def _run_q_chart(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    params, options = config.params, config.options
    axis = np.linspace(-options["extent"], options["extent"], options["points"])
    x, p = np.meshgrid(axis, axis, indexing="ij")
    x, p = x.ravel(), p.ravel()
    q_fock = np.real(qfunction(_target_operator(config), x, p, params))
    if options["target"] == "cat":
        q_exact = cat_lattice_q_exact(
            options["q"], options["alpha0"], options["gamma"], params.beta, x, p, params.lam
        )
    else:
        q_exact = rwa_q_exact(params, np.hypot(x, p), np.arctan2(p, x))
    summary = {"max_deviation": float(np.max(np.abs(q_fock - q_exact)))}
    return {"x": x, "p": p, "q_fock": q_fock, "q_exact": q_exact}, summary


def _mono_solutions(
    params: SystemParams, numerics: NumericsSettings
) -> Tuple[QuasienergySolution, QuasienergySolution]:
    """Floquet modes of the bare drive and of the first-order corrected drive."""
    drive = ncft_monochromatic(params)
    stack = correction_loop(drive, 1, params, numerics)
    return quasienergy_solve(drive, params, numerics), quasienergy_solve(stack, params, numerics)


def _mono_reference(config: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray]:
    # H_T is linear in beta, so its eigenvectors do not depend on it
    unit = config.params.replace(beta=1.0)
    return target_levels(rwa_target(unit), config.options["levels"])


def _level_columns(prefix: str, values: np.ndarray, count: int) -> Dict[str, np.ndarray]:
    values = np.asarray(values)
    return {f"{prefix}_{k}": values[:, k] for k in range(count)}


def _run_correction_scan(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    levels = config.options["levels"]
    betas = config.sweep.values()

    def point(beta: float) -> Tuple[QuasienergySolution, QuasienergySolution, np.ndarray]:
        params = config.params.replace(beta=beta)
        logger.info("correction scan: beta = %.6g", beta)
        energies, _ = target_levels(rwa_target(params), levels)
        return (*_mono_solutions(params, config.numerics), energies)

    results = _map_points(point, betas, threads)
    _, vectors = _mono_reference(config)
    columns: Dict[str, Any] = {"beta": betas}
    for label, which in (("orig", 0), ("1st", 1)):
        solutions = [r[which] for r in results]
        tracked = track_levels(solutions, vectors)
        d_energy, fidelity = [], []
        for sol, indices, (_, _, energies) in zip(solutions, tracked, results):
            lam, omega = sol.params.lam, sol.params.omega
            d_energy.append(fold_quasienergy(sol.epsilon[indices] - energies, lam, omega))
            fidelity.append(
                [
                    state_fidelity(micromotion(sol, idx, sol.params.t0), vectors[:, k])
                    for k, idx in enumerate(indices)
                ]
            )
        columns.update(_level_columns(f"dE_{label}", d_energy, levels))
        columns.update(_level_columns(f"F_{label}", fidelity, levels))
    return _order_level_columns(columns, levels, "beta"), {}


def _order_level_columns(columns: Dict[str, Any], levels: int, first: str) -> Dict[str, Any]:
    ordered = {first: columns[first]}
    for stem in ("dE_orig", "dE_1st", "F_orig", "F_1st"):
        for k in range(levels):
            name = f"{stem}_{k}"
            if name in columns:
                ordered[name] = columns[name]
    return ordered


def _run_state_profile(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    """Fock-amplitude profile of one tracked Floquet mode against its target eigenstate."""
    level = config.options["level"]
    if level >= config.params.n_fock:
        raise ConfigError(f"must be below n_fock={config.params.n_fock}", "options.level")
    unit = config.params.replace(beta=1.0)
    _, vectors = target_levels(rwa_target(unit), level + 1)
    target = vectors[:, level]
    columns: Dict[str, Any] = {"m": np.arange(target.size), "target": np.abs(target)}
    summary: Dict[str, Any] = {}
    for label, sol in zip(("orig", "1st"), _mono_solutions(config.params, config.numerics)):
        index = identify_levels(sol, vectors)[level]
        mode = micromotion(sol, index, sol.params.t0)
        delta = amplitude_profile_delta(mode, target)
        columns[f"delta_{label}"] = delta
        summary[f"max_delta_{label}"] = float(np.max(np.abs(delta)))
        summary[f"fidelity_{label}"] = state_fidelity(mode, target)
    logger.info("state profile: level %d, %s", level, summary)
    return columns, summary


def _run_t0_scan(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    levels = config.options["levels"]
    _, vectors = _mono_reference(config)

    def point(t0: float) -> List[List[float]]:
        params = config.params.replace(t0=t0)
        logger.info("t0 scan: t0 = %.6g", t0)
        rows = []
        for sol in _mono_solutions(params, config.numerics):
            rows.append(_fidelity_curve(sol, identify_levels(sol, vectors), vectors)(t0))
        return rows

    t0s = config.sweep.values()
    results = _map_points(point, t0s, threads)
    columns: Dict[str, Any] = {"t0": t0s}
    columns.update(_level_columns("F_orig", [r[0] for r in results], levels))
    columns.update(_level_columns("F_1st", [r[1] for r in results], levels))
    return columns, {}


def _fidelity_curve(
    sol: QuasienergySolution, indices: List[int], vectors: np.ndarray
) -> Callable[[float], List[float]]:
    def point(t: float) -> List[float]:
        return [
            state_fidelity(micromotion(sol, idx, t), vectors[:, k])
            for k, idx in enumerate(indices)
        ]

    return point


def _run_micromotion_scan(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    levels = config.options["levels"]
    _, vectors = _mono_reference(config)
    times = config.sweep.values()
    columns: Dict[str, Any] = {"t": times}
    summary: Dict[str, Any] = {}
    for label, sol in zip(("orig", "1st"), _mono_solutions(config.params, config.numerics)):
        point = _fidelity_curve(sol, identify_levels(sol, vectors), vectors)
        fidelity = np.asarray(_map_points(point, times, threads))
        columns.update(_level_columns(f"F_{label}", fidelity, levels))
        summary[f"peak_t_{label}"] = [float(times[i]) for i in np.argmax(fidelity, axis=0)]
    return columns, summary


def _cat_truncation(config: ExperimentConfig, alpha: float) -> ExperimentConfig:
    """Double the truncation once when the cat states reach the top Fock level."""
    q, n = config.options["q"], config.params.n_fock
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        for s in range(q):
            cat_state(q, s, alpha, n, config.numerics.tail_threshold)
    if not any(issubclass(w.category, TruncationWarning) for w in caught):
        return config
    logger.warning("cat states truncated at N=%d, retrying with N=%d", n, 2 * n)
    return config.with_overrides(n_fock=2 * n)


def _cat_series(config: ExperimentConfig, order: int) -> List[FrameSeries]:
    """Rotating-frame series of each drive order at unit amplitude."""
    options = config.options
    unit = config.params.replace(beta=1.0)
    target = ncft_cat_lattice(options["q"], options["alpha0"], options["gamma"], unit)
    try:
        quadrature_check(target, unit, config.numerics)
    except ConvergenceError as e:
        logger.warning("cat lattice target: %s", e)
    if order == 0:
        stack = DriveStack((target,))
    else:
        stack = correction_loop(target, order, unit, config.numerics)
    return [
        build_frame_series(c, unit.lam, unit.n_fock, config.numerics) for c in stack.orders
    ]


def _run_cat_infidelity(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    options = config.options
    alpha = options["alpha"] or options["alpha0"] * math.exp(options["gamma"])
    config = _cat_truncation(config, alpha)
    orders = options["orders"]
    series = _cat_series(config, max(orders))
    q, n = options["q"], config.params.n_fock

    def point(beta: float) -> List[float]:
        params = config.params.replace(beta=beta)
        row = []
        for order in orders:
            # order m of the drive scales as beta^(m+1)
            total = series[0].scaled(beta)
            for m in range(1, order + 1):
                total = total + series[m].scaled(beta ** (m + 1))
            fold = q if all(h % q == 0 for h in total.blocks) else 1
            result = propagator(total, params, config.numerics, symmetry=fold)
            row.append(1.0 - fidelity_cats(result.unitary, q, alpha, n))
        logger.info("cat infidelity: beta = %.6g, %s", beta, row)
        return row

    betas = config.sweep.values()
    infidelity = np.asarray(_map_points(point, betas, threads))
    columns: Dict[str, Any] = {"beta": betas}
    summary: Dict[str, Any] = {"alpha": alpha, "n_fock": n}
    for j, order in enumerate(orders):
        columns[f"IF_order{order}"] = infidelity[:, j]
        try:
            slope, _ = fit_power_law(betas, infidelity[:, j])
        except DomainError:
            slope = None
        summary[f"slope_order{order}"] = slope
    return columns, summary


def _run_sweet_spot(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    root = sweet_spot_solve(config.options["lo"], config.options["hi"])
    return {"alpha": [root], "residual": [float(sweet_spot_residual(root))]}, {}


def _run_drive_chart(config: ExperimentConfig, threads: int) -> Tuple[Dict, Dict]:
    options, params = config.options, config.params
    unit = params.replace(beta=1.0)
    target = ncft_cat_lattice(options["q"], options["alpha0"], options["gamma"], unit)
    stack = correction_loop(target, 1, unit, config.numerics)
    k_c = cat_lattice_k_c(options["gamma"], params.lam)
    ratio = np.linspace(0.0, options["k_ratio_max"], options["k_points"])
    tau = np.linspace(0.0, 2 * np.pi, options["tau_points"], endpoint=False)
    columns: Dict[str, Any] = {
        "k_over_kc": np.repeat(ratio, tau.size),
        "tau": np.tile(tau, ratio.size),
    }
    for m, coefficient in enumerate(stack.orders):
        chart = drive_chart(coefficient, ratio * k_c, tau).ravel()
        columns[f"a{m}"] = np.abs(chart)
        columns[f"phi{m}"] = np.angle(chart)
    return columns, {"k_c": k_c}


RUNNERS: Dict[str, Callable[[ExperimentConfig, int], Tuple[Dict, Dict]]] = {
    "spectrum": _run_spectrum,
    "q_chart": _run_q_chart,
    "correction_scan": _run_correction_scan,
    "state_profile": _run_state_profile,
    "t0_scan": _run_t0_scan,
    "micromotion_scan": _run_micromotion_scan,
    "cat_infidelity": _run_cat_infidelity,
    "sweet_spot": _run_sweet_spot,
    "drive_chart": _run_drive_chart,
}


def run(
    config: ExperimentConfig, threads: int = 1, out: Optional[str] = None
) -> ResultTable:
    """
    Run one experiment.

    Args:
        config: Resolved experiment config
        threads: Worker threads for sweep points
        out: Directory for <output>.csv and <output>.meta.json; nothing is
            written when None

    Returns:
        ResultTable whose metadata echoes the resolved config
    """
    if threads < 1:
        raise ConfigError("must be at least 1", "threads")
    started = datetime.now(timezone.utc)
    logger.info("running %s", config.experiment)
    columns, summary = RUNNERS[config.experiment](config, threads)
    metadata = {
        "config": config.to_dict(),
        "version": __version__,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "summary": summary,
    }
    table = ResultTable(columns, metadata)
    if out is not None:
        csv_path, _ = table.write(str(Path(out) / config.output))
        logger.info("wrote %s (%d rows)", csv_path, table.rows)
    return table
