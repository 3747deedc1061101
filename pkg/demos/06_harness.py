"""End-to-end seeded run through the harness; the same run is available as `maskfaith run`."""
import json
import sys
import tempfile

from maskfaith.harness import ExperimentConfig, run_experiment

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="maskfaith-")
cfg = ExperimentConfig.from_dict({"seed": 11, "output_dir": out, "max_samples": 60,
                                  "adv_training": True, "adv_epochs": 5})
summary = run_experiment(cfg)
print(json.dumps({k: v for k, v in summary.items() if not isinstance(v, (dict, list))}, indent=2))
print("artifacts in", out)
