from __future__ import annotations

import os
import tempfile

# Settings are read at import time; keep plots headless and runs out of the repo.
os.environ.setdefault("MPLBACKEND", "Agg")
os.environ.setdefault("CSQNS_OUTPUT_DIR", tempfile.mkdtemp(prefix="csqns-runs-"))
os.environ.setdefault("CSQNS_LOG_LEVEL", "WARNING")
