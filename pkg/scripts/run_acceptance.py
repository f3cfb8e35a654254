"""Run the acceptance suite and print one line per criterion."""

import sys
from pathlib import Path

import pytest

if __name__ == "__main__":
    tests = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    sys.exit(pytest.main(["-q", "-p", "no:cacheprovider", str(tests)] + sys.argv[1:]))
