"""Backend selection at import time."""

import os
import subprocess
import sys

import pytest

from hsse import _backend

PROBE = "from hsse import _backend; print(_backend.backend.NAME)"


def _probe(value):
    env = dict(os.environ)
    env.pop("HSSE_PURE_PYTHON", None)
    if value is not None:
        env["HSSE_PURE_PYTHON"] = value
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True,
                         text=True, check=True)
    return out.stdout.strip()


def test_environment_forces_python_backend():
    assert _probe("1") == "python"


@pytest.mark.skipif(_backend.compiled_backend is None, reason="compiled backend not built")
def test_compiled_backend_is_default():
    assert _probe(None) == "compiled"
    assert _probe("0") == "compiled"


def test_python_backend_always_available():
    assert _backend.python_backend.NAME == "python"
