from src.spectroscopy.services.reconstruction import MethodRegistry

from .compressed import (
    CompressedRademacherMethod,
    CompressedRademacherTgvMethod,
    CompressedTgvMethod,
)
from .cpmg import CpmgNnlsMethod


def build_method_registry() -> MethodRegistry:
    registry = MethodRegistry()
    registry.register(CompressedTgvMethod())
    registry.register(CompressedRademacherMethod())
    registry.register(CompressedRademacherTgvMethod())
    registry.register(CpmgNnlsMethod())
    return registry


__all__ = [
    "CompressedRademacherMethod",
    "CompressedRademacherTgvMethod",
    "CompressedTgvMethod",
    "CpmgNnlsMethod",
    "build_method_registry",
]
