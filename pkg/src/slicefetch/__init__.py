"""slicefetch: a deterministic functional micro-op simulator with a
slice-learning forecast prefetcher, cache hierarchy, reference baselines,
synthetic workload oracles, and an HTTP experiment service."""

__version__ = "0.1.0"

from .config import RunConfig, parse_config_text
from .engine import compare, dump_slices, run

__all__ = ["RunConfig", "parse_config_text", "run", "compare", "dump_slices", "__version__"]
