import sys

from fusodom.cli.main import main

sys.exit(main())
