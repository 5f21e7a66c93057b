"""
Steady state of a small spiking network
=======================================

Two neurons excite each other.  Neuron 0 also receives external excitation,
and both receive external inhibition.  We solve for the stationary
excitation probabilities and then check them against a spike-level
simulation of the same network.
"""

import numpy as np

from rnnkit.model import RnnParameters
from rnnkit.simulator import compare_product_form, simulate
from rnnkit.solver import solve_fixed_point

# weights are rates: w[i, j] is how often i sends an excitatory spike to j
w_plus = np.array([[0.0, 1.0],
                   [1.0, 0.0]])
params = RnnParameters.from_weights(w_plus, None, Lambda=[0.5, 0.0], lambda_=[0.5, 0.5])
print("firing rates:", params.r)

steady = solve_fixed_point(params)
print("q =", steady.q, "after", steady.iterations, "iterations")

# the simulation starts empty and discards the first 5% as warm-up
report = simulate(params, horizon=1e5, seed=0, collect_joint=True)
print("simulated q =", report.empirical_q.round(4))

cmp = compare_product_form(report, steady)
print("largest marginal gap: %.4f" % cmp.max_marginal_gap)
print("total variation to the product form: %.4f" % cmp.total_variation)

# joint occupancy near the origin, simulated against predicted
from rnnkit.simulator import product_form
pf = product_form(steady.q, report.k_max)
print(np.column_stack([report.joint_histogram[:3, :3].ravel(), pf[:3, :3].ravel()]).round(4))
