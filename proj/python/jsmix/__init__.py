"""Finite-mixture open-population capture-recapture engine."""

try:
    from ._core import (  # type: ignore[attr-defined]
        InvariantError,
        ValidationError,
        expected_nsuper,
        fit,
        map_classify,
        mauc,
        models,
        overlap,
        rhat,
        simulate,
        waic,
        __version__,
    )
except ImportError:  # development layout: extension built next to the package
    from _core import (  # type: ignore[no-redef]
        InvariantError,
        ValidationError,
        expected_nsuper,
        fit,
        map_classify,
        mauc,
        models,
        overlap,
        rhat,
        simulate,
        waic,
        __version__,
    )

__all__ = [
    "InvariantError",
    "ValidationError",
    "expected_nsuper",
    "fit",
    "map_classify",
    "mauc",
    "models",
    "overlap",
    "rhat",
    "simulate",
    "waic",
    "__version__",
]
