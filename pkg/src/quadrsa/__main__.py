import sys

from quadrsa.cli import main

sys.exit(main())
