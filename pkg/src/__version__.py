"""Version of the superconcentration lab, read from the VERSION file at the repository root."""

from pathlib import Path

_VERSION_FILE = Path(__file__).resolve().parent.parent / "VERSION"
_FALLBACK = "0.1.0"


def _read_version() -> str:
    try:
        text = _VERSION_FILE.read_text(encoding="utf-8").strip()
    except OSError:
        return _FALLBACK
    return text or _FALLBACK


__version__ = _read_version()

# Stamped into every JSON report header and printed by --version
VERSION_STRING = f"superconcentration-lab v{__version__}"
