from __future__ import annotations

import importlib

import pytest


@pytest.mark.parametrize(
    ("module", "name"),
    [
        ("src.spectroscopy.services.spectra", "csqns.spectra"),
        ("src.spectroscopy.services.control", "csqns.control"),
        ("src.spectroscopy.services.forward", "csqns.forward"),
        ("src.spectroscopy.services.oracle", "csqns.oracle"),
        ("src.spectroscopy.services.solvers", "csqns.solvers"),
        ("src.spectroscopy.services.trials", "csqns.experiments"),
        ("src.spectroscopy.services.experiments", "csqns.experiments"),
        ("src.spectroscopy.methods.compressed", "csqns.methods"),
    ],
)
def test_module_logs_under_its_documented_name(module: str, name: str) -> None:
    assert importlib.import_module(module).logger.name == name
