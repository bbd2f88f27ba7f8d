"""Matrix-level block encodings for PCA, linear systems and Hamiltonian simulation."""

__version__ = "0.1.0"

from .encoding import BlockEncoding, CostLedger, StageRecord  # noqa: E402
from .errors import BlockEncError  # noqa: E402

__all__ = ["BlockEncoding", "BlockEncError", "CostLedger", "StageRecord", "__version__"]
