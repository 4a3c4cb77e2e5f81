"""Static figures from superdiff artifact directories.

Batch renderer, not an app: reads the documented CSV/JSON schemas, writes
deterministic PNG files with a caption embedding the producing manifest's
hash. Inputs are never modified.
"""

__version__ = "0.1.0"

from .render import FigureSpec, render

__all__ = ["FigureSpec", "render", "__version__"]
