import sys

from ddmeasure.cli import main

sys.exit(main())
