"""Allow ``python -m poisson_disorder``."""

from .cli import main

raise SystemExit(main())
