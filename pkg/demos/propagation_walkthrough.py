"""Walk through one forward pass on a four-user, five-item toy graph.

Builds the normalized operators from a hand-written graph, runs two layers of
propagation, and checks the sparse result against a dense block-matrix
evaluation of the same map.

    python3 demos/propagation_walkthrough.py
"""
import numpy as np

from socgcf.checks import ToyGraph, dense_forward
from socgcf.model import EmbeddingState, ModelConfig, forward

np.set_printoptions(precision=3, suppress=True)

# users 0 and 1 share most items, 2 and 3 share one; 0-2 and 1-3 are friends
r = np.array([
    [1, 1, 1, 0, 0],
    [1, 1, 0, 0, 0],
    [0, 0, 1, 1, 0],
    [0, 0, 0, 1, 1],
], dtype=float)
s = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
c = np.array([[0, .05, 0, 0], [.05, 0, 0, 0], [0, 0, 0, .005], [0, 0, .005, 0]])
toy = ToyGraph(r, s, c)
g = toy.graph_inputs(use_social=True, use_correlation=True)

print("normalized R (1/sqrt(deg_u deg_i) on each interaction):")
print(g.r_norm.to_dense())
print("normalized S:")
print(g.s_norm.to_dense())

cfg = ModelConfig(embed_dim=2, n_layers=2)
rng = np.random.default_rng(0)
e0 = rng.normal(size=(4 + 5, 2))
trace = forward(EmbeddingState(e0[:4], e0[4:]), g, cfg)
for k, layer in enumerate(trace.layers):
    print(f"layer {k} user embeddings:\n{layer.e_users}")
print("final (mean over layers) user embeddings:")
print(trace.final.e_users)

dense = dense_forward(toy, e0, cfg, True, True)[-1]
print("max |sparse - dense| on the final embeddings:",
      float(np.max(np.abs(trace.final.stacked() - dense))))
