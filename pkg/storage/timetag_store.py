"""
Time-tag Store for hgpairs
Reads and writes time-tag files, CSV exports and their JSON manifests
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd

from utils.errors import TimeTagFormatError
from utils.event_sim import PS_PER_S, TimeTagStream

logger = logging.getLogger(__name__)

MAGIC = b'HGPAIRS-TTAG'
VERSION = 1
HEADER_DTYPE = np.dtype([('magic', 'S12'), ('version', '<u4')])
RECORD_DTYPE = np.dtype([('channel', 'u1'), ('timestamp', '<i8')])  # packed, 9 bytes

PathLike = Union[str, Path]


class TimeTagStore:
    def __init__(self, base_dir: PathLike = '.'):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, name: PathLike) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.base_dir / path

    @staticmethod
    def manifest_path(path: Path) -> Path:
        return path.with_name(path.name + '.manifest.json')

    def write(self, name: PathLike, streams: Iterable[TimeTagStream],
              metadata: Optional[Dict] = None) -> Path:
        """One file for any number of channels, records ordered by (timestamp, channel)"""
        streams = list(streams)
        path = self._path(name)
        channels = np.concatenate([np.full(len(s), s.channel, dtype=np.uint8) for s in streams])
        stamps = np.concatenate([s.timestamps_ps for s in streams]).astype(np.int64)
        order = np.lexsort((channels, stamps))

        records = np.empty(stamps.size, dtype=RECORD_DTYPE)
        records['channel'] = channels[order]
        records['timestamp'] = stamps[order]
        header = np.array([(MAGIC, VERSION)], dtype=HEADER_DTYPE)

        with open(path, 'wb') as fh:
            fh.write(header.tobytes())
            fh.write(records.tobytes())
        self._write_manifest(path, streams, metadata or {})
        logger.info(f"Wrote {stamps.size} tags on {len(streams)} channel(s) to {path}")
        return path

    def _write_manifest(self, path: Path, streams, metadata: Dict):
        manifest = {
            'format': MAGIC.decode('ascii'),
            'version': VERSION,
            'channels': {
                str(s.channel): {
                    'label': s.label,
                    'count': len(s),
                    'duration_s': s.duration_s,
                    'live_time_s': s.live_time_s,
                }
                for s in streams
            },
            'metadata': metadata,
        }
        with open(self.manifest_path(path), 'w') as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write('\n')

    def read_records(self, name: PathLike) -> np.ndarray:
        path = self._path(name)
        if not path.exists():
            raise TimeTagFormatError(f"Time-tag file not found: {path}")
        raw = path.read_bytes()
        if len(raw) < HEADER_DTYPE.itemsize:
            raise TimeTagFormatError(f"{path} is shorter than the {HEADER_DTYPE.itemsize}-byte header")
        header = np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
        if bytes(header['magic']) != MAGIC:
            raise TimeTagFormatError(f"{path} has bad magic {bytes(header['magic'])!r}")
        if int(header['version']) != VERSION:
            raise TimeTagFormatError(f"{path} has unsupported version {int(header['version'])}")
        body = raw[HEADER_DTYPE.itemsize:]
        if len(body) % RECORD_DTYPE.itemsize:
            raise TimeTagFormatError(f"{path} has a truncated record")
        return np.frombuffer(body, dtype=RECORD_DTYPE)

    def read(self, name: PathLike) -> Dict[int, TimeTagStream]:
        """Streams keyed by channel; durations come from the manifest when present"""
        path = self._path(name)
        records = self.read_records(path)
        manifest_file = self.manifest_path(path)
        channels_meta = {}
        if manifest_file.exists():
            with open(manifest_file) as fh:
                channels_meta = json.load(fh).get('channels', {})
        else:
            logger.warning(f"No manifest for {path}; using the last tag as duration and live time")

        streams = {}
        for channel in np.unique(records['channel']).tolist() + [int(c) for c in channels_meta]:
            channel = int(channel)
            if channel in streams:
                continue
            stamps = records['timestamp'][records['channel'] == channel].astype(np.int64)
            meta = channels_meta.get(str(channel))
            if meta:
                duration, live, label = meta['duration_s'], meta['live_time_s'], meta['label']
            else:
                duration = float(stamps[-1]) / PS_PER_S if stamps.size else 0.0
                live, label = duration, f"channel{channel}"
            stream = TimeTagStream(channel, label, stamps, duration, live)
            stream.validate()
            streams[channel] = stream
        return streams

    def export_csv(self, name: PathLike, csv_name: PathLike) -> Path:
        records = self.read_records(name)
        out = self._path(csv_name)
        frame = pd.DataFrame({
            'channel': records['channel'].astype(int),
            'timestamp_ps': records['timestamp'].astype(np.int64),
        })
        frame.to_csv(out, index=False)
        return out
