"""Security risk assessment toolkit for ML-enabled medical devices.

Models a device as a hierarchical control structure, mines vulnerability and
regulatory datasets for evidence against its technologies, enumerates the
attack surface that can reach the ML controller, and drafts attack scenarios
and causal analyses an analyst can review, all from the command line or over
HTTP.
"""

__version__ = "0.1.0"
