import sys

from rlgnet.cli import main

sys.exit(main())
