"""
rmtlab: asymptotic random-matrix laws, free-probability transforms,
large-system detector analysis and replica fixed points, each checked
against Monte Carlo simulation of finite random matrices.
"""

__version__ = "0.1.0"
