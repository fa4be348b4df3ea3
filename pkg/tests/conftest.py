# Makes the sibling oracles module importable from any test file.
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))
