"""Head-to-head run of the two solvers on one synthetic problem.

Both minimize the same penalized negative log-likelihood over L precision
matrices. The proximal point solver (rppa) wraps a semismooth Newton method
inside an outer regularization loop and converges in a handful of outer
rounds, each costing one or two Newton steps; the operator-splitting
baseline (admm) takes cheap first-order sweeps and needs many more of them
at tight tolerances. The two must agree on the optimum, so each serves as a
check on the other.
"""

import numpy as np

from fglasso import (
    MatrixCollection,
    ProblemData,
    admm_solve,
    gen_nearest_neighbour,
    primal_objective,
    rppa_solve,
    sample_covariance,
)

# a planted nearest-neighbour network with 3 related classes and samples
inst = gen_nearest_neighbour(p=40, L=3, m=4, seed=11, n_samples=300)
S = MatrixCollection(np.stack([sample_covariance(x) for x in inst.samples]))
data = ProblemData(S=S, lambda1=0.1, lambda2=0.05)

rep_n = rppa_solve(data)
rep_s = admm_solve(data)

print("newton-based solver")
print("  converged       :", rep_n.converged)
print("  outer rounds    :", rep_n.outer_iters)
print("  newton steps    :", rep_n.total_newton)
print("  cg iterations   :", rep_n.total_cg)
print("  kkt residual    : %.2e" % rep_n.eta_p)
print("  objective       : %.10f" % rep_n.objective)
print("  seconds         : %.2f" % rep_n.seconds)

print("splitting baseline")
print("  converged       :", rep_s.converged)
print("  sweeps          :", rep_s.outer_iters)
print("  kkt residual    : %.2e" % rep_s.eta_p)
print("  objective       : %.10f" % rep_s.objective)
print("  seconds         : %.2f" % rep_s.seconds)

dobj = abs(rep_n.objective - rep_s.objective)
dth = np.linalg.norm(rep_n.Theta.arr - rep_s.Theta.arr)
print("agreement")
print("  |obj gap|       : %.2e" % dobj)
print("  ||estimate gap||: %.2e" % dth)
assert dobj <= 1e-6 * (1 + abs(rep_n.objective))
assert dth <= 1e-4 * (1 + np.linalg.norm(rep_n.Theta.arr))

# outer trace of the newton solver: sigma ramps up while the residual
# collapses, with at most a couple of inner steps per round
print("\nnewton solver trace (k, sigma, kkt residual, newton, cg)")
for row in rep_n.trace:
    print("  %2d  %8.1f  %.3e  %2d  %3d" % (row.k, row.sigma, row.eta, row.newton, row.cg))

# both reports expose the estimate as a MatrixCollection; the objective is
# reproducible from the data
val = primal_objective(rep_n.Theta, data)
assert abs(val - rep_n.objective) < 1e-9
ratio = rep_s.outer_iters / max(rep_n.total_newton, 1)
print("\nsplitting sweeps per newton step: %.1f" % ratio)
