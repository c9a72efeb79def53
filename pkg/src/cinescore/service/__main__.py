"""Allow ``python -m cinescore.service`` as an entry point."""

import sys

from .cli import main

sys.exit(main())
