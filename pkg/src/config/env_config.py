"""
Environment-based defaults for experiment runs
"""
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class Settings:
    """Run-wide defaults; command-line flags and manifests take precedence."""

    seed: int = 0
    threads: int = 1
    log_level: str = 'INFO'
    log_file: Optional[str] = None
    metrics_file: Optional[str] = None
    output_dir: str = 'reports'

    def logging_config(self) -> Dict[str, Any]:
        return {
            'level': self.log_level,
            'file': self.log_file,
            'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        }


def _int_from_env(name: str, default: int) -> int:
    raw = os.getenv(name, '').strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be an integer, got {raw!r}")


def load_settings_from_env() -> Settings:
    """Load run defaults from environment variables"""
    settings = Settings(
        seed=_int_from_env('LAB_SEED', 0),
        threads=_int_from_env('LAB_THREADS', 1),
        log_level=os.getenv('LOG_LEVEL', 'INFO'),
        log_file=os.getenv('LOG_FILE') or None,
        metrics_file=os.getenv('LAB_METRICS_FILE') or None,
        output_dir=os.getenv('LAB_OUTPUT_DIR', 'reports'),
    )
    if settings.threads < 1:
        raise ValueError(f"LAB_THREADS must be >= 1, got {settings.threads}")
    if not 0 <= settings.seed < 2 ** 64:
        raise ValueError(f"LAB_SEED must be an unsigned 64-bit integer, got {settings.seed}")

    logger.debug(f"Settings from environment: seed={settings.seed}, threads={settings.threads}, "
                 f"output_dir={settings.output_dir}, metrics_file={settings.metrics_file or 'disabled'}")
    return settings
