from .bench import bench_cmd
from .metrics import metrics_cmd
from .run import run_cmd
from .synth import synth_cmd

__all__ = ["bench_cmd", "metrics_cmd", "run_cmd", "synth_cmd"]
