"""
Energy decay, artificial boundary sources, and the discrete bound
=================================================================

Three desk-sized runs (shrunk versions of the bundled scenarios so this
script finishes in seconds):

1. a free-streaming bulk with vacuum faces -- the energy decays in terraces
   because the truncated system transports at finitely many wave speeds;
2. the raw half-moment condition versus its stabilization -- with the raw
   matrix, standing waves act as artificial sources and the energy grows
   without any inflow; the stabilized run decays monotonically;
3. an inflow-driven run whose energy stays below the proven bound
   E(0) + C * int g^T g dt.
"""

import numpy as np

from pnsat import detect_plateaus, energy_bound_check, run, scenario_from_dict

# 1. free flight in vacuum: terraced decay ------------------------------------
vacuum = scenario_from_dict({
    "name": "demo_vacuum",
    "model": {"N": 9, "scattering": {"kind": "none"}, "stopping": {"mode": "time"}},
    "domain": {"axes": ["x"], "extents": [[-1.0, 1.0]], "cells": [150]},
    "boundaries": {
        "x_low": {"type": "onsager", "alpha": 1.0, "psi_in": {"kind": "none"}},
        "x_high": {"type": "onsager", "alpha": 1.0, "psi_in": {"kind": "none"}},
    },
    "initial": {"kind": "gaussian_bulk", "mu": [0.0], "sigma": [0.2],
                "normalize": "pdf", "direction": {"kind": "isotropic"}},
    "integration": {"cfl": 0.5, "t_end": 9.0},
    "outputs": {"snapshot_times": [0.4, 2.0]},
})
res = run(vacuum)
t, e = res.log.times, res.log.energies
print("vacuum run: monotone =", bool(np.all(np.diff(e) <= 1e-10 * e[0])))
for plateau in detect_plateaus(t, e):
    print(f"  plateau {plateau[0]:6.2f} .. {plateau[1]:6.2f}  at E/E0 = "
          f"{np.interp(plateau[0], t, e) / e[0]:.4f}")

# 2. raw half-moment condition versus the stabilized one ----------------------
def half_space(kind):
    return scenario_from_dict({
        "name": f"demo_{kind}",
        "model": {"N": 2, "scattering": {"kind": "none"}, "stopping": {"mode": "time"}},
        "domain": {"axes": ["x"], "extents": [[0.0, 3.0]], "cells": [200]},
        "boundaries": {
            "x_low": {"type": kind, "alpha": 1.0, "psi_in": {"kind": "none"}},
            "x_high": {"type": "onsager", "alpha": 1.0, "psi_in": {"kind": "none"}},
        },
        "initial": {"kind": "gaussian_envelope_moments", "center": [0.0], "width": [0.1],
                    "moments": [{"l": 0, "k": 0, "amp": 1.0},
                                {"l": 2, "k": 0, "amp": 2.5},
                                {"l": 2, "k": 2, "amp": -1.0}],
                    "odd_from_bc": "x_low"},
        "integration": {"cfl": 0.5, "t_end": 1.0},
        "outputs": {"snapshot_times": [1.0]},
    })

for kind in ("unstable_marshak", "onsager"):
    r = run(half_space(kind))
    tt, ee = r.log.times, r.log.energies
    probe = [0.0, 0.1, 0.3, 1.0]
    vals = [float(np.interp(p, tt, ee)) for p in probe]
    trend = "grows after the outgoing waves leave" if ee[-1] > vals[2] else "decays to steady state"
    print(f"{kind:17s}: E at t = {probe} -> {[round(v, 4) for v in vals]}  ({trend})")

# 3. inflow-driven run against the discrete energy bound ----------------------
inflow = scenario_from_dict({
    "name": "demo_inflow",
    "model": {"N": 5, "scattering": {"kind": "isotropic", "sigma_s": 1.0},
              "stopping": {"mode": "time"}},
    "domain": {"axes": ["x"], "extents": [[0.0, 1.0]], "cells": [80]},
    "boundaries": {
        "x_low": {"type": "onsager", "alpha": 1.0,
                  "psi_in": {"kind": "isotropic", "amplitude": 1.0}},
        "x_high": {"type": "onsager", "alpha": 1.0, "psi_in": {"kind": "none"}},
    },
    "initial": {"kind": "zero"},
    "integration": {"cfl": 0.5, "t_end": 1.2},
    "outputs": {"snapshot_times": [1.2]},
})
r = run(inflow)
print("\n" + energy_bound_check(r).describe())
