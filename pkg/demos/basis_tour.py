"""A short tour of the time basis.

Prints the Gram residual and a corner of the coupling matrix, then shows how
fast the projection residual of two smooth signals falls as modes are added.

    python3 demos/basis_tour.py
"""
import numpy as np

from maxwell_tdr.basis import BasisSet, TimeGrid, project_samples, projection_residual, stiffness, synthesize, weighted_gram

T = 2.5

b = BasisSet(15, T)
print("max |Gram - I|     = %.2e" % np.abs(weighted_gram(b) - np.eye(16)).max())
s = stiffness(b)
print("largest |s_mn|     = %.1f" % np.abs(s).max())
print("s[:4, :4] =")
print(np.array2string(s[:4, :4], precision=4, suppress_small=True))

print("\nprojection residual sum_m r_m^2")
for label, u, u_tt in (("t^2  ", lambda t: t * t, lambda t: 2.0 + 0 * t),
                       ("sin t", np.sin, lambda t: -np.sin(t))):
    row = [np.sum(projection_residual(u, u_tt, BasisSet(N, T)) ** 2) for N in (2, 4, 8, 12, 15)]
    print(label, "  ".join("N=%-2d %.1e" % (N, r) for N, r in zip((2, 4, 8, 12, 15), row)))

# sampled data: project 73 samples of cos(2t) and evaluate the expansion between samples
tg = TimeGrid(T, 73)
coef = project_samples(np.cos(2 * tg.times), b, tg, rule="gregory")
t = np.linspace(0.1, 2.4, 7)
err = np.abs(synthesize(coef, t, b) - np.cos(2 * t)).max()
print("\ncos(2t) from 73 samples, N = 15: max error between samples %.1e" % err)
