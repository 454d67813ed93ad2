"""Internal and external validity indices plus the review protocol.

The external indices compare a partition against annotated grasp types. The
review sample stratifies each cluster by distance to its center, and purity and
redundancy are read off the annotated samples.
"""
import numpy as np

from grasptax import evaluate_partition, kmeans_lp, purity, redundancy, sample_for_review

rng = np.random.default_rng(2)
names = np.array(["power", "precision", "intermediate"])
truth = np.repeat(np.arange(3), 100)
x = rng.normal(0, 6, (3, 4))[truth] + rng.normal(size=(300, 4))

model = kmeans_lp(x, 4, seed=0)  # frame ids default to row indices
print("indices:", evaluate_partition(x, model.assignments, names[truth]).to_dict())

labels = {i: names[truth[i]] for i in range(300)}
per_cluster = []
for c in range(model.k):
    sheet = sample_for_review(model, c, 30, seed=0)
    sampled = [labels[f] for f in sheet.sampled_frame_ids]
    per_cluster.append(sampled)
    print(f"cluster {c}: {len(sheet.sampled_frame_ids)} sampled, purity {purity(sheet, labels):.2f}")
print(f"redundancy {redundancy(per_cluster):.2f}")
