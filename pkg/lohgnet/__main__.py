"""Allow ``python -m lohgnet``."""

import sys

from lohgnet.cli import main

if __name__ == "__main__":
    sys.exit(main())
