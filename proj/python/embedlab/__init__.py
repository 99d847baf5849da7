"""Embedded eigenvalue persistence lab."""
import os
from pathlib import Path

_bundled = Path(__file__).with_name("scenarios")
if _bundled.is_dir():
    os.environ.setdefault("EMBEDLAB_SCENARIOS", str(_bundled))

from ._core import *  # noqa: E402,F401,F403
from ._core import EmbedlabError, __version__  # noqa: E402,F401


def line_model(a=20.0, b=-24.0):
    """Fourth-order line d^4 + a sech^2 + b sech^4."""
    return ModelSpec(ModelKind.FourthOrderLine, SechPair(a, b))  # noqa: F405


def cylinder_model(angular_index=1, v0=1.19, angular_cutoff=3, full=False):
    """-d^2/dz^2 - d^2/dtheta^2 - v0 sech^2 z, full or even-in-theta sector."""
    kind = ModelKind.CylinderFull if full else ModelKind.CylinderEvenSector  # noqa: F405
    return ModelSpec(kind, SechSquaredWell(v0), angular_cutoff, angular_index)  # noqa: F405
