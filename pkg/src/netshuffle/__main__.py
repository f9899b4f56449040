import sys

from netshuffle.cli import main

sys.exit(main())
