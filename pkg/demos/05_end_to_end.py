"""Full pipeline on a synthetic recording.

The recording has a noisy contact signal, 3D and 2D hand poses, appearance
vectors and per-frame sharpness. The pipeline segments interactions, samples
frames, fuses pose and appearance, picks k by the BIC elbow, evaluates against
the grasp labels and writes a keyframe report. This uses the same stages as the
``grasptax run`` command.

Usage: python demos/05_end_to_end.py [output_dir]
"""
import json
import sys
import tempfile
from pathlib import Path

from grasptax import PipelineConfig, write_dataset
from grasptax.pipeline import run
from grasptax.ingestion import Manifest
from grasptax.synthetic import synthetic_dataset

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="grasptax-"))
manifest = write_dataset(synthetic_dataset(n_interactions=12, n_grasps=3, seed=0), out / "data")

# fewer EM restarts than the default 100 to keep the demo quick
config = PipelineConfig().override(**{"engine.gmm.n_init": 10, "engine.gmm.sweep_n_init": 3, "k_range": [2, 8]})
run(Manifest.from_json(out / "data" / "manifest.json"), config, out / "run")

metrics = json.loads((out / "run" / "metrics.json").read_text())
report = json.loads((out / "run" / "report.json").read_text())
print("chosen k:", report["k"])
print("indices:", metrics["metrics"])
for c in report["clusters"]:
    print(f"cluster {c['cluster_id']}: {c['member_count']} members, keyframes "
          f"{[k['frame_id'] for k in c['keyframes']]}")
print("outputs in", out / "run")
