import sys

from odstain.cli import main

sys.exit(main())
