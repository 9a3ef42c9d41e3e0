"""Numerical checks behind the exact-input estimator.

Run with ``python demos/diagnostics_tour.py``.
"""

import numpy as np

from ctsid import ModelOrder, NoiseModel
from ctsid.diagnostics import (
    analytic_average_power,
    empirical_average_power,
    empirical_psi,
    normal_matrix_condition_sweep,
    phi_star_min_eig,
)
from ctsid.harness import reference_input, reference_system
from ctsid.lti import unity
from ctsid.polynomial import sylvester
from ctsid.signals import Multisine, Regular, generate_grid, rng_stream

system, u = reference_system(), reference_input()
order = ModelOrder(2, 0)
grid = generate_grid(Regular(0.3), 100_000)

# Average power of a filtered multisine: sample average vs closed form.
for label, filt in (("u", unity()), ("G u", system)):
    exact = analytic_average_power(filt, u)
    emp = empirical_average_power(filt, u, grid)
    print(f"power of {label:3s}: analytic {exact:.5f}, sampled {emp.value:.5f} +/- {float(emp.stderr_estimate):.1e}")

# Cross moment between the instrument and the noise should vanish.
mom = empirical_psi(system.den, u, NoiseModel(0.1), grid, order, rng=rng_stream(0, 2))
print("noise cross moment z-scores:", np.round(mom.z_scores(), 2))

# The input moment matrix is positive definite only with enough excitation.
# Three sines without an offset fall one short for this model structure.
rich = Multisine(1.0, u.amplitudes, u.frequencies, u.phases)
print("min eigenvalue with an offset added:", f"{phi_star_min_eig(system, rich, order):.3e}")

# Coprime numerator and denominator give a nonsingular Sylvester matrix.
S = sylvester(-system.num, system.den, order.n, order.m)
print("Sylvester determinant:", f"{S.determinant:.4f}", "singular" if S.is_singular() else "nonsingular")

# Conditioning of the normal matrix as the sampling period shrinks.
for h, cond in normal_matrix_condition_sweep(system, u, order, [0.6, 0.3, 0.1, 0.03, 0.01]):
    print(f"h = {h:5.2f}: condition number {cond:.3e}")
