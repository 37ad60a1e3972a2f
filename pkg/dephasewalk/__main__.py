import sys

from dephasewalk.main import main

sys.exit(main())
