import sys

from camoflow.commands import main

sys.exit(main())
