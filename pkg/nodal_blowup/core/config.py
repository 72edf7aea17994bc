"""Configuration management for the nodal blow-up laboratory."""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Central configuration management."""

    def __init__(self):
        """Initialize configuration from environment variables."""
        # Exponent beyond which exp() is refused rather than saturated
        self.overflow_guard = float(os.getenv("NBL_GUARD", "700"))
        self.threads = max(1, int(os.getenv("NBL_THREADS", str(os.cpu_count() or 1))))
        self.log_level = os.getenv("NBL_LOG_LEVEL", "INFO").upper()

        # Numerical tolerances
        self.tolerances = {
            "integrator": float(os.getenv("NBL_INTEGRATOR_TOL", "1e-10")),
            "boundary": float(os.getenv("NBL_BOUNDARY_TOL", "1e-8")),
            "nehari": float(os.getenv("NBL_NEHARI_TOL", "1e-6")),
            "quadrature": float(os.getenv("NBL_QUAD_TOL", "1e-12")),
        }

        # Amplitude scan window for shooting
        self.scan = {
            "min": float(os.getenv("NBL_SCAN_MIN", "0.1")),
            "max": float(os.getenv("NBL_SCAN_MAX", "1e5")),
            "ratio": float(os.getenv("NBL_SCAN_RATIO", "1.05")),
        }

    def reload(self) -> "Config":
        """Re-read the environment in place so existing references stay valid."""
        self.__init__()
        return self

    @classmethod
    def get_instance(cls) -> 'Config':
        """Get or create the singleton configuration instance."""
        if not hasattr(cls, '_instance'):
            cls._instance = cls()
        return cls._instance


# Create a singleton instance
config = Config.get_instance()
