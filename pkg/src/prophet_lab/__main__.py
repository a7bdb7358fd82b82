import sys

from prophet_lab.cli import main

sys.exit(main())
