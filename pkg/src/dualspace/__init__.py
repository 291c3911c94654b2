"""Batch analysis toolkit for daily brokerage trade tapes.

The pipeline: parse tapes (tape_io), aggregate volume into price-change
buckets (bucket_panel), build the interday correlation state space
(state_space), fit the evolution operator in the Fourier dual space
(dual_regression), study the residuals with small neural nets
(neural_kit, residual_study), and compute dynamic liquidity measures
with an event study (liquidity_lab).  synth_market provides a seeded
generator with planted ground truth; pdo_kernel holds the spectral
propagator numerics.
"""

__version__ = "0.1.0"
