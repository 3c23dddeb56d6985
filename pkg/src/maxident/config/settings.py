import os
from dotenv import load_dotenv
import logging

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

class Settings:
    """Toolkit settings loaded from environment variables"""

    def __init__(self):
        # Application Configuration
        self.environment: str = self._get_env("MAXIDENT_ENVIRONMENT", "development")
        self.log_level: str = self._get_env("MAXIDENT_LOG_LEVEL", "INFO")

        # Run audit log (empty string disables it)
        self.run_log_db: str = self._get_env("MAXIDENT_RUN_LOG_DB", "./run_logs.db")

        # Numerical defaults
        self.cdf_floor: float = self._get_float("MAXIDENT_CDF_FLOOR", 1e-12)
        self.generator_lattice_points: int = self._get_int("MAXIDENT_GENERATOR_LATTICE", 7)
        self.equivalence_lattice_points: int = self._get_int("MAXIDENT_EQUIVALENCE_LATTICE", 64)
        self.diagnostics_threshold: float = self._get_float("MAXIDENT_DIAGNOSTICS_THRESHOLD", 1e-9)

        # Worker pool for multistarts and candidate sweeps
        self.max_workers: int = self._get_int("MAXIDENT_MAX_WORKERS", 4)

        # Validate configuration
        self._validate_config()

    def _get_env(self, key: str, default: str = None) -> str:
        """Get environment variable with optional default"""
        return os.getenv(key, default)

    def _get_float(self, key: str, default: float) -> float:
        """Get a float environment variable, falling back to the default"""
        value = os.getenv(key)
        if value is None or value == "":
            return default
        try:
            return float(value)
        except ValueError:
            logger.warning(f"Environment variable {key}={value!r} is not a number; using {default}")
            return default

    def _get_int(self, key: str, default: int) -> int:
        """Get an integer environment variable, falling back to the default"""
        value = os.getenv(key)
        if value is None or value == "":
            return default
        try:
            return int(value)
        except ValueError:
            logger.warning(f"Environment variable {key}={value!r} is not an integer; using {default}")
            return default

    def _validate_config(self):
        """Validate numeric settings, resetting out-of-range values"""
        problems = []

        if not 0.0 < self.cdf_floor < 1e-3:
            problems.append(f"MAXIDENT_CDF_FLOOR={self.cdf_floor}")
            self.cdf_floor = 1e-12
        if self.generator_lattice_points < 2:
            problems.append(f"MAXIDENT_GENERATOR_LATTICE={self.generator_lattice_points}")
            self.generator_lattice_points = 7
        if self.equivalence_lattice_points < 2:
            problems.append(f"MAXIDENT_EQUIVALENCE_LATTICE={self.equivalence_lattice_points}")
            self.equivalence_lattice_points = 64
        if self.diagnostics_threshold <= 0.0:
            problems.append(f"MAXIDENT_DIAGNOSTICS_THRESHOLD={self.diagnostics_threshold}")
            self.diagnostics_threshold = 1e-9
        if self.max_workers < 1:
            problems.append(f"MAXIDENT_MAX_WORKERS={self.max_workers}")
            self.max_workers = 1

        if problems:
            logger.warning(f"Out-of-range settings reset to defaults: {', '.join(problems)}")

    def is_production(self) -> bool:
        """Check if running in production environment"""
        return self.environment.lower() == "production"

    def run_log_enabled(self) -> bool:
        """Check whether CLI runs are recorded in the audit database"""
        return bool(self.run_log_db)

    def as_dict(self) -> dict:
        """Snapshot of the active settings"""
        return {
            "environment": self.environment,
            "log_level": self.log_level,
            "run_log_db": self.run_log_db,
            "cdf_floor": self.cdf_floor,
            "generator_lattice_points": self.generator_lattice_points,
            "equivalence_lattice_points": self.equivalence_lattice_points,
            "diagnostics_threshold": self.diagnostics_threshold,
            "max_workers": self.max_workers
        }

# Global settings instance
settings = Settings()
