"""Invariant suite wiring: profiles, results, and the CLI entry point."""

import pytest

from fepsim.cli import main
from fepsim.validation import TOLERANCE_PROFILES, run_validation


def test_default_profile_all_pass():
    results = run_validation("default")
    assert len(results) == 8
    failures = [r for r in results if not r.passed]
    assert not failures, failures


def test_profiles_share_check_names():
    assert set(TOLERANCE_PROFILES["default"]) == set(TOLERANCE_PROFILES["strict"])


def test_unknown_profile_rejected():
    with pytest.raises(ValueError):
        run_validation("lenient")


def test_cli_validate_reports_and_succeeds(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 8
