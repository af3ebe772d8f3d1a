"""
Results Manager for hgpairs
Writes curves, histograms, reports and intensity images for a run
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from PIL import Image

from config.settings import OUTPUT_DIR

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.9e'


def _plain(value: Any) -> Any:
    """JSON-safe copy with numpy scalars unwrapped and non-finite floats as null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class ResultsManager:
    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        self.out_dir = Path(out_dir or OUTPUT_DIR)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_table(self, name: str, columns: Dict[str, np.ndarray],
                    float_format: str = FLOAT_FORMAT) -> Path:
        out = self.path(name)
        pd.DataFrame(columns).to_csv(out, index=False, float_format=float_format)
        logger.info(f"Wrote {out}")
        return out

    def write_curve(self, name: str, tau_ns: np.ndarray, g2: np.ndarray) -> Path:
        return self.write_table(name, {'tau_ns': tau_ns, 'g2': g2})

    def write_histogram(self, name: str, estimate, counts: Optional[np.ndarray] = None) -> Path:
        columns = {'tau_ns': estimate.tau_ns, 'g2': estimate.g2, 'err': estimate.err}
        if counts is not None:
            columns['counts'] = counts
        return self.write_table(name, columns)

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        out = self.path(name)
        with open(out, 'w') as fh:
            json.dump(_plain(payload), fh, indent=2, sort_keys=True)
            fh.write('\n')
        logger.info(f"Wrote {out}")
        return out

    def write_pgm(self, name: str, intensity: np.ndarray) -> Path:
        """8-bit grayscale, peak mapped to 255, first row on top"""
        peak = float(np.max(intensity))
        scaled = np.zeros_like(intensity, dtype=float) if peak <= 0 else intensity / peak
        pixels = np.rint(scaled * 255.0).astype(np.uint8)
        out = self.path(name)
        Image.fromarray(pixels).save(out, format='PPM')
        logger.info(f"Wrote {out}")
        return out

    def write_matrix(self, name: str, values: np.ndarray, float_format: str = '%.6e') -> Path:
        """Headerless CSV, one row per grid row"""
        out = self.path(name)
        pd.DataFrame(values).to_csv(out, index=False, header=False, float_format=float_format)
        logger.info(f"Wrote {out}")
        return out
