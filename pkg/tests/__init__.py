"""
tests.

This package contains unit tests for the wolfsoftware.zonal-dispatch package.

Usage:
------
To run all tests, use the following command from the root directory:

    pytest

"""

# This file is intentionally left empty to mark the directory as a package for testing.
