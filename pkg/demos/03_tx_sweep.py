# A reduced tx-rate sweep on the mock backend, summarised like the full runs.
import numpy as np

from regtestbed.config import preset
from regtestbed.runner import run_experiment

plan = preset(3, seed=1, duration=60, repetitions=2, values=[0, 4, 15])
report = run_experiment(plan)

for p in report.points:
    s = p.summary
    print(f"tx/s {p.value:>4}: effective {p.effective_tx:6.2f}  "
          f"cpu {s.mean['cpu_pct']:6.2f} %  net {s.mean['net_kbps']:9.1f} KB/s")

# network load grows with the offered rate, CPU stays near idle
net = np.array([p.summary.mean["net_kbps"] for p in report.points])
print(np.all(np.diff(net) > 0))
