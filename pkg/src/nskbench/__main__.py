# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import sys

from nskbench.cli import main

if __name__ == "__main__":
    sys.exit(main())
