"""Forward simulation and reconstruction on a small grid, step by step.

The run is coarse (10^3 nodes, N = 8) so it finishes in well under a minute
on one core; the full-size setup is ``maxwell-tdr pipeline``.

    python3 demos/walkthrough.py [test_id]
"""
import sys
import time
import warnings

import numpy as np

from maxwell_tdr.basis import BasisSet
from maxwell_tdr.data import NoiseSpec, add_noise, project_record
from maxwell_tdr.errors import EmptyRegionError
from maxwell_tdr.fields import Grid3
from maxwell_tdr.forward import DomainReachWarning, ForwardConfig, simulate
from maxwell_tdr.inverse import QRConfig, invert
from maxwell_tdr.phantoms import phantom, phantom_regions, reference_medium, region_peak_error

warnings.simplefilter("ignore", DomainReachWarning)
test_id = int(sys.argv[1]) if len(sys.argv) > 1 else 1

# 1. ground truth on Omega = (-1, 1)^3
omega = Grid3.cube(10)
truth = phantom(test_id, omega)
print("test %d: %d nonzero nodes, max |E0| = %.2f" % (test_id, np.any(truth.values, axis=0).sum(),
                                                      np.abs(truth.values).max()))

# 2. boundary record from the padded-domain leapfrog solver
cfg = ForwardConfig(omega=omega)
t0 = time.perf_counter()
rec = simulate(truth.values, cfg)
print("record: %d times x %d boundary nodes x 3 components, %.1f s"
      % (rec.F.shape[0], rec.F.shape[1], time.perf_counter() - t0))

# 3. 5% multiplicative noise, then projection onto the first 9 basis functions
noisy = add_noise(rec, NoiseSpec(0.05, seed=1))
basis = BasisSet(8, rec.time_grid.T)
modes = project_record(noisy, basis, rule="gregory")
print("mode data: f %s, g %s" % (modes.f.shape, modes.g.shape))

# 4. quasi-reversibility solve with Jacobi-preconditioned CG
qc = QRConfig(N=8, epsilon_reg=1e-6, preconditioner="jacobi", cg_tol=1e-6, cg_max_iter=800, time_rule="gregory")
t0 = time.perf_counter()
E_comp, V, report = invert(modes, reference_medium(omega), basis, qc)
print("CG: %d iterations, converged %s, %.1f s" % (report.iterations, report.converged, time.perf_counter() - t0))

# 5. region-wise peak errors
for r in phantom_regions(test_id):
    try:
        peak, err = region_peak_error(E_comp, r, test_id)
    except EmptyRegionError as exc:  # a region may hold no node on a grid this coarse
        print("  %-20s skipped (%s)" % (r.label, exc))
        continue
    print("  %-20s peak %.3f (true %.2f), relative error %6.1f%%" % (r.label, peak, r.amplitude, 100 * err))
