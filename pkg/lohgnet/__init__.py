"""
LoHGNet - Lorentz-manifold feature encoding and hypergraph relation learning.

Root package: a small dense-tensor substrate with reverse-mode gradients,
Lorentz-model geometry, the dual-branch detection network, evaluation
metrics, a synthetic infrared scene generator and the command-line surface.
"""

__version__ = "0.1.0"
