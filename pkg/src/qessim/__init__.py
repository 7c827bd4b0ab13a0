"""Desk-scale simulator of a two-laser integrated quantum entropy source.

Subpackages by role:

- params / simcore: coupled stochastic laser rate equations and integrator
- detection: combiner, bandwidth/amplifier chain, digitizer, per-pulse sampler
- analysis: histograms, autocorrelation, normality and circular statistics,
  min-entropy
- extraction: seeded Toeplitz randomness extraction
- experiments / cli: reproducible experiment drivers and the command line
"""

__version__ = "0.1.0"
