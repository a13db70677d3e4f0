import os
from pathlib import Path

ROOT_PATH = Path(os.path.abspath(__file__)).parent
MANIFEST_GRAMMAR_PATH = 'protocols/manifest.lark'
