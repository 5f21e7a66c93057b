"""
Checking the learning gradient
==============================

Training needs the derivative of the output error with respect to every
weight.  The analytic route solves one adjoint linear system; here we compare
it with central differences that re-solve the network for each probe.
"""

import numpy as np

from rnnkit.generators import random_subcritical_network
from rnnkit.learning import finite_difference_gradient, gradient, gradient_error
from rnnkit.model import NeuronRoles
from rnnkit.solver import solve_fixed_point

rng = np.random.default_rng(3)
params = random_subcritical_network(rng, 5)
roles = NeuronRoles(input_ids=(0, 1), hidden_ids=(2,), output_ids=(3, 4))
targets = np.array([0.9, 0.1])

steady = solve_fixed_point(params)
g_plus, g_minus = gradient(params, steady, targets, roles)
n_plus, n_minus = finite_difference_gradient(params, targets, roles.output_ids)

print("dE/dw+ (analytic)\n", g_plus.round(5))
print("largest absolute difference:",
      max(np.abs(g_plus - n_plus).max(), np.abs(g_minus - n_minus).max()))
print("relative error:", max(gradient_error(g_plus, n_plus), gradient_error(g_minus, n_minus)))
