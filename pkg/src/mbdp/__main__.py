import sys

from mbdp.cli import main

sys.exit(main())
