from quasilocal_lab.constants import ARTIFACT_VERSION

__version__ = ARTIFACT_VERSION
