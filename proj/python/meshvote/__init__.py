"""Zero-shot mesh part segmentation by multi-view face confidence revoting."""

from ._meshvote import *  # noqa: F401,F403
from ._meshvote import MeshvoteError, run_cli

__all__ = [name for name in dir() if not name.startswith("_")]


def main() -> int:
    """Console entry point mirroring the `meshvote` executable."""
    import sys

    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
