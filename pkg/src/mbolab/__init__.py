"""Graph MBO laboratory: threshold dynamics on random geometric graphs with
continuum references and convergence diagnostics."""

__version__ = "0.1.0"
