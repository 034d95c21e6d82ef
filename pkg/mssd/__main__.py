import sys

from mssd.cli import main

sys.exit(main())
