"""exguard: fragile-code detection and try-catch synthesis for Java sources.

The library segments Java files into bounded units, flags exception-prone
line spans through static analysis plus scenario matching, retrieves matching
knowledge from a hierarchical exception enumeration, ranks candidate
exceptions, synthesizes try-catch patches, and scores results against ground
truth. All model-dependent steps run through a pluggable completion backend
with a deterministic offline mock.
"""

__version__ = "0.1.0"

from .cee import CeeTree, load_bundled, load_cee
from .gateway import Gateway, MockBackend, mock_gateway

__all__ = [
    "CeeTree",
    "Gateway",
    "MockBackend",
    "load_bundled",
    "load_cee",
    "mock_gateway",
    "__version__",
]
