"""Tour of the fused proximal operator, from a single fiber to a full
matrix collection.

The penalty couples L precision matrices two ways: an elementwise l1 term
shrinks individual off-diagonal entries toward zero, and a fusion term
penalizes differences between consecutive matrices. Its proximal operator
separates across off-diagonal positions (i, j) into independent length-L
problems ("fibers"), each solved exactly by total-variation denoising
followed by soft thresholding.
"""

import numpy as np

from fglasso import (
    MatrixCollection,
    fgl_penalty,
    moreau_env_fgl,
    prox_fgl,
    prox_fused,
    soft_threshold,
    tv_denoise,
)

rng = np.random.default_rng(3)

# --- one fiber ------------------------------------------------------------
# v holds the (i, j) entries of all L matrices for one off-diagonal position
v = np.array([1.8, 1.7, -0.2, -0.3, 1.6])
l1, l2 = 0.4, 0.6

res = prox_fused(v, l1, l2)
print("input fiber      :", v)
print("tv stage         :", res.x)
print("after shrinkage  :", res.prox)

# the fusion stage pulls neighbours together: entries 1/2 and 4/5 merge,
# and the l1 stage then shrinks every entry by up to l1
assert np.allclose(res.x, tv_denoise(v, l2))
assert np.allclose(res.prox, soft_threshold(res.x, l1))

# the running sums z certify optimality of the tv stage: x = v - B^T z with
# every |z_j| <= l2, and z_j at the bound exactly where the output jumps
print("certificate z    :", res.z, " (bound", l2, ")")
assert np.abs(res.z).max() <= l2 + 1e-12
assert abs(np.sum(res.x - v)) < 1e-12  # tv preserves the mean

# --- full collection --------------------------------------------------------
# diagonals pass through untouched; every off-diagonal fiber gets the
# two-stage treatment above
L, p = 4, 6
A = rng.normal(0, 1, (L, p, p))
U = MatrixCollection(0.5 * (A + A.transpose(0, 2, 1)))
P = prox_fgl(U, l1, l2)

print("\ncollection shape :", P.arr.shape)
print("diagonals intact :", np.array_equal(np.diagonal(P.arr, 0, 1, 2),
                                           np.diagonal(U.arr, 0, 1, 2)))
print("penalty at U     :", round(fgl_penalty(U, l1, l2), 4))
print("penalty at prox  :", round(fgl_penalty(P, l1, l2), 4))

# the prox minimizes penalty + (1/2)||P - U||^2; any competitor must do worse
def prox_objective(C):
    return fgl_penalty(C, l1, l2) + 0.5 * np.sum((C.arr - U.arr) ** 2)

challenger = MatrixCollection(P.arr + 0.01 * rng.normal(size=P.arr.shape))
print("prox objective   :", round(prox_objective(P), 6))
print("perturbed        :", round(prox_objective(challenger), 6))
assert prox_objective(P) < prox_objective(challenger)

# the Moreau envelope evaluates that minimum directly and is a smooth
# stand-in for the nonsmooth penalty
env = moreau_env_fgl(U, 1.0, l1, l2)
print("moreau envelope  :", round(env, 6))
assert abs(env - prox_objective(P)) < 1e-10
print("\nall fused prox identities verified")
