"""Evolutionary illusion generator: CPPN images evolved with NEAT, scored by
a frame predictor, Lucas-Kanade optical flow, and a four-condition fitness.
"""

__version__ = "0.1.0"
