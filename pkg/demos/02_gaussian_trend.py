"""Track a strengthening dependence trend against the true boundary.

The ``gaussian_linear`` family moves the Gaussian correlation from 0.2 to
0.8 over the sample. The boundary bulges out along the diagonal as the
correlation grows, and eta in the first quadrant rises with it. The
density-ray oracle gives the true boundary at each time.
"""

import numpy as np

from nsgeo.copulas import CopulaSpec, gauge_oracle, sample_path
from nsgeo.geometry import boundary_curve, default_phi_grid, eta_from_boundary
from nsgeo.model import eta_trajectory, fit_model
from nsgeo.numerics import RngStream

T = 5000
spec = CopulaSpec("gaussian_linear", T)
model = fit_model(sample_path(spec, RngStream(1)))

times = np.linspace(1, T, 6)
grid = default_phi_grid(360)

# %% radius of the boundary along the diagonal, fitted vs true
fit_r = 1.0 / model.gauge_fit.predict(np.full(times.size, np.pi / 4), times)
true_r = np.array([1.0 / gauge_oracle(spec, t, np.pi / 4)[0] for t in times])

# %% first-quadrant eta, fitted vs true
fit_eta = eta_trajectory(model.gauge_fit, times, grid)[:, 0]
true_eta = [eta_from_boundary(boundary_curve(lambda p, s: gauge_oracle(spec, s, p), t, grid)) for t in times]

print("    t   rho   r_fit  r_true  eta_fit  eta_true")
for t, rho, a, b, c, d in zip(times, spec.params(times)["rho"], fit_r, true_r, fit_eta, true_eta):
    print(f"{t:5.0f}  {rho:4.2f}  {a:6.3f}  {b:6.3f}  {c:7.3f}  {d:8.3f}")
