"""Top-level package for permuton_lab."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("permuton-lab")
except PackageNotFoundError:
    __version__ = "uninstalled"

__author__ = "Eva Maxfield Brown"
__email__ = "evamxb@uw.edu"
