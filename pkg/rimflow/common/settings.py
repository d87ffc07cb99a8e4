from __future__ import annotations

import os


def worker_count() -> int:
    """
    Worker cap for parallel sweeps:
      - Prefer env var RIMFLOW_THREADS="4"
      - Else os.cpu_count()
      - Never below 1
    """
    raw = os.getenv("RIMFLOW_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return max(1, os.cpu_count() or 1)


def matrix_size_cap() -> int:
    raw = os.getenv("RIMFLOW_MAX_MATRIX", "6000").strip()
    try:
        return max(1, int(raw))
    except ValueError:
        return 6000


def log_level() -> str:
    return os.getenv("LOG_LEVEL", "INFO").strip().upper() or "INFO"
