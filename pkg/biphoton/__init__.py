"""
Biphoton two-photon detection toolkit
"""

__version__ = "1.0.0"
