import sys
from pathlib import Path

# Make sibling fixture modules importable from any invocation directory.
sys.path.insert(0, str(Path(__file__).parent))
