"""Hyperbolic neural networks on the hyperboloid model, low-distortion tree
embeddings with curvature selection, and tree-embedding experiments.

Submodules:

* :mod:`hyptree.hypgeom`  - hyperboloid geometry kernel
* :mod:`hyptree.trees`    - weighted trees, metrics, generators, spring layout
* :mod:`hyptree.networks` - MLP / hyperbolic-network parameters, forwards, memorizers
* :mod:`hyptree.autodiff` - minimal batched reverse-mode tape
* :mod:`hyptree.train`    - pair-distance regression training
* :mod:`hyptree.embed`    - explicit tree embeddings, curvature selection, distortion
* :mod:`hyptree.cli`      - command-line entry points
"""

__version__ = "0.1.0"
