"""Model-free walkthrough: recover the controller from transition data.

The learner never reads the system matrices. It probes a plant through the
one-step interface (k, x, u) -> x_next, fits one quadratic kernel per stage
by least squares, and extracts the same gains, kernels, and multiplier the
model-based path computes.
"""

import numpy as np

from termlq import (
    SimulatedPlant,
    default_gaussian_spec,
    learn,
    learned_policy,
    make_instance,
    rollout,
    sample_threshold,
    solve_lambda,
    solve_schedule,
)

A = [np.array([[1.0, 2.0], [-1.0, 4.0]]),
     np.array([[5.0, 3.0], [-2.0, 1.0]]),
     np.array([[-4.0, 1.0], [2.0, 5.0]])]
B = [np.array([[1.0], [-1.0]]),
     np.array([[2.0], [1.0]]),
     np.array([[4.0], [2.0]])]
inst = make_instance(A, B, np.eye(2), np.eye(1), np.eye(2),
                     np.array([1.0, 2.0]), np.array([6.0, 7.0]))

np.set_printoptions(precision=4, suppress=True)

# the plant wraps the instance but the learner only sees its step() method
plant = SimulatedPlant(inst)
dist = default_gaussian_spec(inst.n, inst.m)

d = 2 * inst.n + inst.m
print(f"probe vector dimension d = 2n+m = {d}")
print(f"identifiability threshold = d(d+1)/2 = {sample_threshold(inst.n, inst.m)}")

l = 30
learned = learn(plant, (inst.n, inst.m, inst.N), (inst.Q, inst.R, inst.H),
                inst.x0, inst.xi, l, dist, seed=7)

print(f"\nfitted kernel coefficients at {l} samples per stage")
for k, qm in enumerate(learned.qmatrices):
    print(f"  stage {k}: nu = {qm.nu}")

print("\nfit diagnostics")
for k, diag in enumerate(learned.fit_diagnostics):
    print(f"  stage {k}: residual {diag.residual:.3e}   condition {diag.cond:.1e}")

# cross-check against the matrices the learner was never shown
sched = solve_schedule(inst)
lamsol = solve_lambda(sched, inst)
gap = 0.0
for k in range(inst.N + 1):
    gap = max(gap, np.abs(learned.K[k] - sched.K[k]).max(),
              np.abs(learned.K1[k] - sched.K1[k]).max())
print("\nagreement with the model-based path")
print(f"  max gain gap        = {gap:.3e}")
print(f"  multiplier gap      = {np.abs(learned.lambda_star - lamsol.lambda_star).max():.3e}")
print(f"  learned lambda*     = {learned.lambda_star}")

traj = rollout(inst, learned_policy(learned))
print(f"\nrollout under the learned controller")
print(f"  terminal state = {traj.states[-1]}   target = {inst.xi}")
print(f"  terminal miss  = {traj.terminal_error:.3e}")
