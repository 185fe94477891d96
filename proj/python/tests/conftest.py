import os
import sys
from pathlib import Path

# Prefer the module from a CMake build tree when one is given.
_build = os.environ.get("MINSOC_BUILD_DIR")
if _build:
    sys.path.insert(0, str(Path(_build) / "python"))
