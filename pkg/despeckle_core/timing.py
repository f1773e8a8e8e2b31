import time
from typing import Optional

from loguru import logger


class Stopwatch:
    """
    Wall-clock timer for estimator calls.

    Logs the label and elapsed time on exit. Integrates with loguru (and includes the pipeline
    cell label if one is set in the context).

    Usage:
        ```python
        with Stopwatch("jade") as sw:
            result = jade(X, cfg)
        print(sw.elapsed)
        ```
    """

    def __init__(self, label: str = "elapsed", level: str = "DEBUG") -> None:
        self.label = label
        self.level = level
        self._start: Optional[float] = None
        self.elapsed: float = 0.0

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.elapsed = time.perf_counter() - self._start
        logger.log(
            self.level,
            "{label} - {latency:.4f}s",
            label=self.label,
            latency=self.elapsed,
        )
