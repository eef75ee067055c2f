"""
Run configuration.

A TOML file with one table per concern. Every physical key carries its
unit as a suffix (``radius_angstrom``, ``dt_fs``, ``omega0_cm1``...);
dimensionless keys carry none. Missing keys take the B850 defaults, so an
empty file is a valid configuration.
"""

import hashlib
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from polaring.dynamics.initial import INITIAL_KINDS
from polaring.dynamics.state import IntegratorConfig, SinkSpec
from polaring.errors import ConfigError, ModelError
from polaring.model.bath import PhononBath, build_phonon_bath
from polaring.model.disorder import SEED_MAX, DisorderSpec
from polaring.model.exciton import CouplingParams
from polaring.model.geometry import RingGeometry, build_geometry
from polaring.observables.transport import ARC, CHORD
from polaring.spectroscopy.lineshape import BathLineshapeParams

THREADS_ENV = "POLARING_THREADS"

EXPERIMENTS = ("statics", "dynamics", "transfer", "msd", "spectra")

# suffix -> unit label, longest first so compound suffixes win
UNIT_SUFFIXES = {
    "cm1_angstrom3": "cm-1 angstrom^3",
    "angstrom": "angstrom",
    "omega0": "omega0",
    "cm1": "cm-1",
    "deg": "degrees",
    "rad": "radians",
    "mev": "meV",
    "ev": "eV",
    "nm": "nm",
    "fs": "fs",
    "ps": "ps",
    "k": "K",
}


def split_unit(key: str) -> Tuple[str, Optional[str]]:
    """('radius', 'angstrom') for 'radius_angstrom'; (key, None) without a unit suffix."""
    for suffix in UNIT_SUFFIXES:
        if key.endswith("_" + suffix):
            return key[: -len(suffix) - 1], suffix
    return key, None


def unit_of(key: str) -> Optional[str]:
    _, suffix = split_unit(key)
    return UNIT_SUFFIXES.get(suffix) if suffix else None


class _Section:
    """Frozen dataclass mixin that parses and validates one TOML table."""

    SECTION = ""

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]):
        known = {f.name: f for f in fields(cls)}
        stems = {split_unit(name)[0]: name for name in known}
        values = {}
        for key, value in data.items():
            if key not in known:
                stem, suffix = split_unit(key)
                if suffix is not None and stem in stems:
                    expected = stems[stem]
                    raise ConfigError(
                        f"unit mismatch: got {key!r}, expected {expected!r}",
                        cls.SECTION,
                        key,
                        unit_of(expected),
                    )
                raise ConfigError(f"unknown key (valid: {', '.join(sorted(known))})", cls.SECTION, key)
            values[key] = _coerce(cls.SECTION, key, known[key].default, value)
        return cls(**values)

    def fail(self, key: str, message: str):
        raise ConfigError(f"{message}, got {getattr(self, key)!r}", self.SECTION, key, unit_of(key))


def _coerce(section: str, key: str, default: Any, value: Any) -> Any:
    unit = unit_of(key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", section, key, unit)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", section, key, unit)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", section, key, unit)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", section, key, unit)
        return value
    if isinstance(default, tuple):
        items = value if isinstance(value, (list, tuple)) else [value]
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in items):
            raise ConfigError(f"expected a list of numbers, got {value!r}", section, key, unit)
        return tuple(float(v) for v in items)
    return value


@dataclass(frozen=True)
class RunSection(_Section):
    SECTION = "run"
    experiment: str = "dynamics"
    ensemble_size: int = 1
    seed: int = 0
    output_dir: str = "runs"
    threads: int = 0
    batch_size: int = 16
    plots: bool = False
    exclusion_budget: float = 0.01

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            self.fail("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        if self.ensemble_size < 1:
            self.fail("ensemble_size", "must be >= 1")
        if not 0 <= self.seed <= SEED_MAX:
            self.fail("seed", "must be a non-negative 64-bit integer")
        if self.threads < 0:
            self.fail("threads", "must be >= 0 (0 = automatic)")
        if self.batch_size < 1:
            self.fail("batch_size", "must be >= 1")
        if not 0.0 <= self.exclusion_budget < 1.0:
            self.fail("exclusion_budget", "must lie in [0, 1)")


@dataclass(frozen=True)
class GeometrySection(_Section):
    SECTION = "geometry"
    n_sites: int = 16
    radius_angstrom: float = 23.0
    intra_dimer_distance_angstrom: float = 9.1
    inter_dimer_distance_angstrom: float = 8.9
    intra_dimer_angle_deg: float = 167.5
    inter_dimer_angle_deg: float = 147.5

    def __post_init__(self):
        if self.n_sites < 4 or self.n_sites % 2:
            self.fail("n_sites", "must be an even number >= 4")
        for key in ("radius_angstrom", "intra_dimer_distance_angstrom", "inter_dimer_distance_angstrom"):
            if not getattr(self, key) > 0.0:
                self.fail(key, "must be positive")


@dataclass(frozen=True)
class CouplingSection(_Section):
    SECTION = "coupling"
    j1_intra_cm1: float = 594.0
    j2_inter_cm1: float = 491.0
    dipole_constant_cm1_angstrom3: float = 640725.0
    site_energy_cm1: float = 0.0


@dataclass(frozen=True)
class DisorderSection(_Section):
    SECTION = "disorder"
    sigma_e_cm1: float = 0.0
    sigma_j_cm1: float = 0.0

    def __post_init__(self):
        for key in ("sigma_e_cm1", "sigma_j_cm1"):
            if not getattr(self, key) >= 0.0:
                self.fail(key, "must be >= 0")

    @property
    def sigma(self) -> float:
        """Reported disorder strength: the larger of the two widths."""
        return max(self.sigma_e_cm1, self.sigma_j_cm1)


@dataclass(frozen=True)
class BathSection(_Section):
    SECTION = "bath"
    omega0_cm1: float = 1670.0
    bandwidth_w: float = 0.5
    huang_rhys: float = 0.5

    def __post_init__(self):
        if not self.omega0_cm1 > 0.0:
            self.fail("omega0_cm1", "must be positive")
        if not 0.0 <= self.bandwidth_w <= 1.0:
            self.fail("bandwidth_w", "must lie in [0, 1]")
        if not self.huang_rhys >= 0.0:
            self.fail("huang_rhys", "must be >= 0")


@dataclass(frozen=True)
class InitialSection(_Section):
    SECTION = "initial"
    kind: str = "site"
    site: int = 8

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            self.fail("kind", f"must be one of {', '.join(INITIAL_KINDS)}")
        if self.site < 0:
            self.fail("site", "must be >= 0")


@dataclass(frozen=True)
class IntegratorSection(_Section):
    SECTION = "integrator"
    dt_fs: float = 0.05
    t_max_fs: float = 300.0
    record_stride: int = 20
    regularization_eps: float = 1e-8


@dataclass(frozen=True)
class SinkSection(_Section):
    SECTION = "sink"
    gamma_omega0: float = 0.0
    site: int = 0

    def __post_init__(self):
        if not self.gamma_omega0 >= 0.0:
            self.fail("gamma_omega0", "must be >= 0")
        if self.site < 0:
            self.fail("site", "must be >= 0")


@dataclass(frozen=True)
class LineshapeSection(_Section):
    SECTION = "lineshape"
    lambda0_cm1: float = 100.0
    gamma0_cm1: float = 35.0
    temperature_k: float = 77.0
    matsubara_tol: float = 1e-8
    matsubara_max: int = 10_000


@dataclass(frozen=True)
class SpectraSection(_Section):
    SECTION = "spectra"
    t_w_fs: Tuple[float, ...] = (0.0,)
    t_max_fs: float = 400.0
    step_fs: float = 2.0
    padding: int = 4
    omega_max_omega0: float = 2.5

    def __post_init__(self):
        if not self.t_w_fs or any(t < 0.0 for t in self.t_w_fs):
            self.fail("t_w_fs", "must be a non-empty list of times >= 0")
        if not self.t_max_fs > 0.0:
            self.fail("t_max_fs", "must be positive")
        if not self.step_fs > 0.0:
            self.fail("step_fs", "must be positive")
        if self.padding < 1:
            self.fail("padding", "must be >= 1")
        if not self.omega_max_omega0 > 0.0:
            self.fail("omega_max_omega0", "must be positive")


@dataclass(frozen=True)
class AnalysisSection(_Section):
    SECTION = "analysis"
    ipr_exponent: int = 2
    msd_metric: str = CHORD
    msd_fit_lo_fs: float = 1.6
    msd_fit_hi_fs: float = 16.0
    steady_lo_fs: float = 150.0
    steady_hi_fs: float = 300.0
    energy_windows: int = 8
    min_spacings: int = 500
    ipr_bins: int = 60

    def __post_init__(self):
        if self.ipr_exponent not in (2, 4):
            self.fail("ipr_exponent", "must be 2 or 4")
        if self.msd_metric not in (CHORD, ARC):
            self.fail("msd_metric", f"must be {CHORD!r} or {ARC!r}")
        if not 0.0 <= self.msd_fit_lo_fs < self.msd_fit_hi_fs:
            self.fail("msd_fit_hi_fs", "must exceed msd_fit_lo_fs")
        if not 0.0 <= self.steady_lo_fs <= self.steady_hi_fs:
            self.fail("steady_hi_fs", "must not precede steady_lo_fs")
        if self.energy_windows < 1:
            self.fail("energy_windows", "must be >= 1")
        if self.min_spacings < 2:
            self.fail("min_spacings", "must be >= 2")
        if self.ipr_bins < 1:
            self.fail("ipr_bins", "must be >= 1")


SECTIONS = {
    "run": RunSection,
    "geometry": GeometrySection,
    "coupling": CouplingSection,
    "disorder": DisorderSection,
    "bath": BathSection,
    "initial": InitialSection,
    "integrator": IntegratorSection,
    "sink": SinkSection,
    "lineshape": LineshapeSection,
    "spectra": SpectraSection,
    "analysis": AnalysisSection,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one run; build the domain objects from it."""
    run: RunSection = field(default_factory=RunSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    coupling: CouplingSection = field(default_factory=CouplingSection)
    disorder: DisorderSection = field(default_factory=DisorderSection)
    bath: BathSection = field(default_factory=BathSection)
    initial: InitialSection = field(default_factory=InitialSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    sink: SinkSection = field(default_factory=SinkSection)
    lineshape: LineshapeSection = field(default_factory=LineshapeSection)
    spectra: SpectraSection = field(default_factory=SpectraSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)

    def __post_init__(self):
        n = self.geometry.n_sites
        if self.initial.site >= n:
            raise ConfigError(f"site {self.initial.site} outside a {n}-site ring", "initial", "site")
        if self.sink.site >= n:
            raise ConfigError(f"site {self.sink.site} outside a {n}-site ring", "sink", "site")
        try:
            self.build_geometry()
        except ModelError as e:
            raise ConfigError(str(e), "geometry", "radius_angstrom", "angstrom") from e
        self.integrator_config().check_stability(self.build_bath())
        self.lineshape_params()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        sections = {}
        for name, table in data.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section (valid: {', '.join(SECTIONS)})", name)
            if not isinstance(table, Mapping):
                raise ConfigError("expected a table", name)
            sections[name] = SECTIONS[name].from_mapping(table)
        return cls(**sections)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out = {}
        for name in SECTIONS:
            table = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in table.items()}
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """
        Apply ``{"section.key": value}`` overrides and revalidate.

        None values are skipped so argparse defaults can be passed straight in.
        """
        data = self.to_dict()
        for dotted, value in overrides.items():
            if value is None:
                continue
            section, _, key = dotted.partition(".")
            if section not in data:
                raise ConfigError("unknown section in override", section, key)
            data[section][key] = list(value) if isinstance(value, tuple) else value
        return RunConfig.from_dict(data)

    def with_run(self, **changes) -> "RunConfig":
        return replace(self, run=replace(self.run, **changes))

    def build_geometry(self) -> RingGeometry:
        g = self.geometry
        return build_geometry(
            g.n_sites,
            g.radius_angstrom,
            (g.intra_dimer_distance_angstrom, g.inter_dimer_distance_angstrom),
            (g.intra_dimer_angle_deg, g.inter_dimer_angle_deg),
        )

    def coupling_params(self) -> CouplingParams:
        c = self.coupling
        return CouplingParams(c.j1_intra_cm1, c.j2_inter_cm1, c.dipole_constant_cm1_angstrom3, c.site_energy_cm1)

    def build_bath(self) -> PhononBath:
        b = self.bath
        return build_phonon_bath(self.geometry.n_sites, b.omega0_cm1, b.bandwidth_w, b.huang_rhys)

    def disorder_spec(self, realization_index: int = 0) -> DisorderSpec:
        d = self.disorder
        return DisorderSpec(d.sigma_e_cm1, d.sigma_j_cm1, self.run.seed, realization_index)

    def integrator_config(self) -> IntegratorConfig:
        i = self.integrator
        return IntegratorConfig(i.dt_fs, i.t_max_fs, i.record_stride, i.regularization_eps)

    def sink_spec(self) -> Optional[SinkSpec]:
        if self.sink.gamma_omega0 == 0.0:
            return None
        return SinkSpec(gamma=self.sink.gamma_omega0, site=self.sink.site)

    def lineshape_params(self) -> BathLineshapeParams:
        ls = self.lineshape
        return BathLineshapeParams(ls.lambda0_cm1, ls.gamma0_cm1, ls.temperature_k, ls.matsubara_tol, ls.matsubara_max)

    @property
    def is_clean(self) -> bool:
        return self.disorder.sigma_e_cm1 == 0.0 and self.disorder.sigma_j_cm1 == 0.0


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Read and validate a TOML run configuration.

    Args:
        path: TOML file; None gives the all-defaults configuration

    Raises:
        ConfigError: on syntax errors (with line and column), duplicate or
            unknown keys, unit mismatches and out-of-range values
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    return RunConfig.from_dict(data)


def resolve_threads(config: RunConfig) -> int:
    """Configured worker count, else $POLARING_THREADS, else the CPU count."""
    if config.run.threads > 0:
        return config.run.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            threads = int(env)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer", "run", "threads") from e
        if threads < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1", "run", "threads")
        return threads
    return os.cpu_count() or 1
