import sys

from minamilab.cli import main

sys.exit(main())
