"""Select the compiled assembly kernel when available.

Set ``HSSE_PURE_PYTHON=1`` to force the NumPy implementation.
"""

import os

from . import _assembly_py

python_backend = _assembly_py
compiled_backend = None

try:
    from . import _assembly_c as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("HSSE_PURE_PYTHON", "") in ("", "0"):
    backend = compiled_backend
else:
    backend = python_backend
