"""``python3 -m slocal_lab`` entry point."""

from __future__ import annotations

import sys

from .cli import main

sys.exit(main())
