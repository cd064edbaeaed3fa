from dataclasses import dataclass, field
import os

from dotenv import load_dotenv

from src.errors import ConfigError


load_dotenv()  # loads variables from a local .env file (if it exists)


def _get_int(name: str, default: int) -> int:
    """
    Read an int from environment variables.
    Example: REGION_BUDGET="4194304"
    """
    value = os.getenv(name)
    return int(value) if value is not None else default


def _get_str(name: str, default: str) -> str:
    value = os.getenv(name)
    return value if value else default


def _positive(name: str, value: int) -> int:
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class Config:
    """
    One place for the project settings.

    Every field can be overridden from the environment (or a .env file).
    Values are read when Config() is created, not at import time.
    """
    region_budget: int = field(default_factory=lambda: _get_int("REGION_BUDGET", 2**22))
    solver_budget: int = field(default_factory=lambda: _get_int("SOLVER_BUDGET", 10**6))
    iso_cap: int = field(default_factory=lambda: _get_int("ISO_CAP", 64))
    oracle_cap: int = field(default_factory=lambda: _get_int("ORACLE_CAP", 20))
    mis_exact_cap: int = field(default_factory=lambda: _get_int("MIS_EXACT_CAP", 24))
    exact_region_cap: int = field(default_factory=lambda: _get_int("EXACT_REGION_CAP", 20))
    merge_mode: str = field(default_factory=lambda: _get_str("MERGE_MODE", "sat"))
    jobs: int = field(default_factory=lambda: _get_int("JOBS", 1))
    mlflow_experiment: str = field(
        default_factory=lambda: _get_str("MLFLOW_EXPERIMENT", "ts-decomposition")
    )
    mlflow_tracking_uri: str = field(
        default_factory=lambda: _get_str("MLFLOW_TRACKING_URI", "file:./mlruns")
    )

    def __post_init__(self) -> None:
        for name in (
            "region_budget",
            "solver_budget",
            "iso_cap",
            "oracle_cap",
            "mis_exact_cap",
            "exact_region_cap",
            "jobs",
        ):
            _positive(name, getattr(self, name))
        if self.merge_mode not in ("sat", "none"):
            raise ConfigError(f"merge_mode must be 'sat' or 'none', got {self.merge_mode!r}")
