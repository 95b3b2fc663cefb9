"""Firmware software-composition scanning primitives.

Thin wrapper over the native _firmscan module; see the project README for
the full CLI pipeline.
"""

try:
    from firmscan._firmscan import *  # noqa: F401,F403  (wheel layout)
    from firmscan._firmscan import __doc__  # noqa: F401
except ImportError:  # in-tree build: module sits next to the package
    from _firmscan import *  # noqa: F401,F403
    from _firmscan import __doc__  # noqa: F401
