"""python -m nodal_blowup"""

import sys

from .main import main

sys.exit(main())
