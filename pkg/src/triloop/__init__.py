"""Digital-twin toolkit for a three-loop thermal-fluid facility.

The package couples a lumped-parameter plant simulator with a GRU surrogate
that forecasts facility state faster than real time, plus the glue an
operator console needs: dataset generation, training/evaluation, streamed
telemetry, an HTTP gateway, and a natural-language assistant.

Subpackage map:

- ``channels``  -- canonical channel catalog, frames, CSV round-trip
- ``plant``     -- plant simulator, scenarios, supervisory demand control
- ``gru``       -- GRU surrogate model, exact-gradient training, checkpoints
- ``pipeline``  -- dataset windowing/normalization, training loop, sweeps
- ``twin``      -- autoregressive rollout, steady-state detection, speedup
- ``server``    -- newline-delimited-JSON telemetry service
- ``gateway``   -- HTTP/SSE facade for browser clients
- ``assistant`` -- context-grounded advisory pipeline with rule fallback
- ``cli``       -- command-line entry point tying everything together

Heavy numerical kernels are JIT-compiled when numba is available; set
``TRILOOP_NO_NUMBA=1`` to force the pure-numpy fallbacks.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "channels", "plant", "gru", "pipeline", "twin",
    "server", "gateway", "assistant", "cli", "errors",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
