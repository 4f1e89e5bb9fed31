"""Frame-prediction sidecar: serves a predictive network over the EIGP
stdio wire protocol so the evolution engine can use it as an external
evaluator. Ships an `--echo` self-test mode that needs no weights.
"""

__version__ = "0.1.0"
