import sys
from pathlib import Path

# Make the sibling synth module importable regardless of invocation dir.
sys.path.insert(0, str(Path(__file__).parent))
