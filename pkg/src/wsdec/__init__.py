"""Two-stage near-ML decoding of CRC-aided polar codes with code-weight sphere refinement."""

__version__ = "0.1.0"
