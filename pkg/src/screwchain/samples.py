"""Paths to the bundled sample models."""

from importlib import resources

__all__ = ["sample_model_path", "SAMPLE_MODELS"]

SAMPLE_MODELS = ("pendulum_1r", "planar_2r", "arm_6r")


def sample_model_path(name: str):
    """Filesystem path of a bundled model, e.g. ``sample_model_path("planar_2r")``."""
    if name not in SAMPLE_MODELS:
        raise KeyError(f"unknown sample model {name!r}; available: {SAMPLE_MODELS}")
    return resources.files("screwchain.models").joinpath(f"{name}.json")
