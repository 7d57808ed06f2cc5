import sys

from icfusion.cli import main

sys.exit(main())
