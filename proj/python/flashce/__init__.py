"""Flash read-channel simulation, binning, and parameter estimation.

Thin wrapper around the compiled `_core` extension. When running against an
in-tree build (rather than an installed wheel), point FLASHCE_CORE_DIR at the
directory containing the compiled module.
"""

import os
import sys

_core_dir = os.environ.get("FLASHCE_CORE_DIR")
if _core_dir and _core_dir not in sys.path:
    sys.path.insert(0, _core_dir)

try:
    from _core import *  # type: ignore[import-not-found]  # noqa: F401,F403
    from _core import __doc__ as _core_doc  # type: ignore[import-not-found]
except ImportError:
    from flashce._core import *  # noqa: F401,F403
    from flashce._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
