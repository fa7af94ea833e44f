"""
lutkan

Compiles B-spline KAN layers into segment-wise quantized lookup tables, runs
them on CPU and benchmarks them against the spline evaluation they replace.
"""

__version__ = "1.0.0"
