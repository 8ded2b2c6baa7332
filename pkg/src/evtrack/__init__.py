"""Event-camera multi-object tracking: frame-based and event-by-event.

The package turns a raw event stream (timestamped pixel flashes from a
neuromorphic sensor) into persistent bounding-box tracks, two ways:

- `eot`: accumulate short binary frames, propose boxes from row/column
  histograms, and carry tracks across frames by predicted overlap.
- `ceot`: update a fixed pool of tracker rectangles on every single
  event, no frames at all.

Supporting cast: `synth` generates seeded scenes with exact ground
truth, `evaluation` scores tracks against it, `io` reads and writes
the stream/track/report formats, and `cli` wires it all together.
"""

from .boxes import BoxF, interpolate_boxes, iou, lerp_box, overlap_area, overlap_ratio
from .ceot import CeotConfig, CTracker, CTrackerMotion
from .ceot import process as ceot_process
from .config import RunConfig, load_config
from .eot import EotConfig, EotState, Track, TrackSnapshot, run_eot
from .errors import EvTrackError
from .evaluation import EvalReport, GroundTruthRecord, pr_sweep
from .events import Event, EventStream, SensorGeometry
from .framer import BinaryFrame, FramerConfig, RegionProposal
from .io import read_events, read_ground_truth, read_tracks, write_events, write_tracks
from .synth import SceneSpec, generate, standard_suite

__version__ = "0.1.0"

__all__ = [
    "BoxF",
    "BinaryFrame",
    "CeotConfig",
    "CTracker",
    "CTrackerMotion",
    "EotConfig",
    "EotState",
    "EvalReport",
    "Event",
    "EventStream",
    "EvTrackError",
    "FramerConfig",
    "GroundTruthRecord",
    "RegionProposal",
    "RunConfig",
    "SceneSpec",
    "SensorGeometry",
    "Track",
    "TrackSnapshot",
    "ceot_process",
    "generate",
    "interpolate_boxes",
    "iou",
    "lerp_box",
    "load_config",
    "overlap_area",
    "overlap_ratio",
    "pr_sweep",
    "read_events",
    "read_ground_truth",
    "read_tracks",
    "run_eot",
    "standard_suite",
    "write_events",
    "write_tracks",
    "__version__",
]
