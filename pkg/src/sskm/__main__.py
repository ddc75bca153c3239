import sys

from sskm.cli import main

sys.exit(main())
