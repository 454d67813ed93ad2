"""Choosing the number of clusters.

``estimate_k`` fits a GMM for every k in a range and takes the elbow of the BIC
curve; ``select_k_by_silhouette`` takes the k with the best mean silhouette.
"""
import numpy as np

from grasptax import estimate_k, select_k_by_silhouette

rng = np.random.default_rng(1)
centers = rng.uniform(-15, 15, (4, 5))
x = centers[np.repeat(np.arange(4), 120)] + rng.normal(size=(480, 5))

sweep = estimate_k(x, (2, 8), seed=0)
print("BIC by k:")
for k, b in zip(sweep.k_values, sweep.criterion):
    print(f"  k={k}  {b:10.1f}")
print("BIC elbow picks k =", sweep.chosen_k)

sil = select_k_by_silhouette(x, (2, 8), seed=0)
print("silhouette by k:", [round(s, 3) for s in sil.criterion])
print("silhouette picks k =", sil.chosen_k)
