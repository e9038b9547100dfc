import sys

from hatefl.cli import main

sys.exit(main())
