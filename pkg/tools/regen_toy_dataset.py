"""Regenerate the bundled toy dataset (data/toy30) from its fixed recipe."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gcsr.data import save_dataset
from gcsr.sbm import toy_dataset

out = os.path.join(os.path.dirname(__file__), "..", "data", "toy30")
save_dataset(toy_dataset(), out)
print(f"wrote {os.path.abspath(out)}")
