from __future__ import annotations

from rimflow.main import main

raise SystemExit(main())
