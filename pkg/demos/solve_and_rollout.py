"""Model-based walkthrough on a two-state, three-stage system.

Builds the worked example, checks that the terminal target is attainable,
runs the backward recursion, solves for the constraint multiplier, and rolls
the closed loop forward to the target.
"""

import numpy as np

from termlq import (
    check_reachability,
    make_instance,
    optimal_policy,
    rollout,
    solve_lambda,
    solve_schedule,
)

# time-varying dynamics: one matrix pair per stage k = 0, 1, 2
A = [np.array([[1.0, 2.0], [-1.0, 4.0]]),
     np.array([[5.0, 3.0], [-2.0, 1.0]]),
     np.array([[-4.0, 1.0], [2.0, 5.0]])]
B = [np.array([[1.0], [-1.0]]),
     np.array([[2.0], [1.0]]),
     np.array([[4.0], [2.0]])]

# unit running weights, unit terminal weight, and the endpoint pair:
# start at x0, finish exactly at xi three steps later
inst = make_instance(A, B, Q=np.eye(2), R=np.eye(1), H=np.eye(2),
                     x0=np.array([1.0, 2.0]), xi=np.array([6.0, 7.0]))

np.set_printoptions(precision=4, suppress=True)

print("reachability")
result = check_reachability(inst)
print("  target attainable:", result.reachable)
print("  certificate zeta: ", result.zeta)

# backward pass: P(k) kernels, feedback gains K(k), and the constraint
# gains K1(k) that channel the multiplier into each stage's input
sched = solve_schedule(inst)
print("\nbackward recursion")
for k in range(inst.N + 1):
    print(f"  stage {k}: K = {sched.K[k].ravel()}   K1 = {sched.K1[k].ravel()}")
    print(f"           P =\n{np.array2string(sched.P[k], prefix='           P = ')}")

# the multiplier is what bends the plain LQ solution onto the target
lamsol = solve_lambda(sched, inst)
print("\nmultiplier")
print("  lambda* =", lamsol.lambda_star)
print("  equation residual =", f"{lamsol.residual:.3e}")

traj = rollout(inst, optimal_policy(sched, lamsol.lambda_star))
print("\nclosed-loop rollout")
for k, (x, u) in enumerate(zip(traj.states, traj.inputs)):
    print(f"  k={k}:  x = {x}   u = {u}")
print(f"  k={inst.N + 1}:  x = {traj.states[-1]}   (target {inst.xi})")
print(f"\ncost = {traj.cost:.4f}")
print(f"terminal miss = {traj.terminal_error:.3e}")
