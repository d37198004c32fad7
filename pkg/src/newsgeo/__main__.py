import sys

from newsgeo.cli import main

sys.exit(main())
