import sys

from certasy.main import main

sys.exit(main())
