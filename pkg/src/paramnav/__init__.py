"""paramnav: direction discovery in the parameter space of a toy image generator.

A desk-scale toolkit that finds unit-norm directions in the weight space of a
small convolutional generator such that shifting the weights along a direction
produces a consistent, interpretable visual effect, plus the evaluation
protocols (latent non-reachability, realism curves, locality heatmaps) and an
interactive inspection service.
"""

__version__ = "0.1.0"
