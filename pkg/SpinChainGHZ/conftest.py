# conftest.py: shared pytest setup
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs (deselect with -m 'not slow')")
