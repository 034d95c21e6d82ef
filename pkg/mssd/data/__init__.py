"""Dataset ingestion and synthesis."""

from mssd.data.frame import SeriesFrame
from mssd.data.loader import load_csv, save_csv
from mssd.data.synth import SynthComponents, synth_seasonal

__all__ = ["SeriesFrame", "SynthComponents", "load_csv", "save_csv", "synth_seasonal"]
