"""lvglass: feasibility, Gibbs equilibria, and Parisi-type free energy for
random Lotka-Volterra interaction networks."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
