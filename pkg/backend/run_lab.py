"""
Script to run the cut-off laboratory with the backend directory on the module path.
This ensures the cutofflab package can be found regardless of where the script is run from.
"""
import os
import sys

current_dir = os.path.dirname(os.path.abspath(__file__))
if current_dir not in sys.path:
    sys.path.insert(0, current_dir)

from cutofflab.cli import run  # noqa: E402

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
