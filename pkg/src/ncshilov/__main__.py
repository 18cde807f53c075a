import sys

from ncshilov.cli import main

sys.exit(main())
