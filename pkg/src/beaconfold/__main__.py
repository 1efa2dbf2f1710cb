import sys

from beaconfold.cli import main

sys.exit(main())
