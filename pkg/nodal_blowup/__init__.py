"""
Nodal blow-up laboratory for Moser-Trudinger critical problems on the unit disk
"""

__version__ = "0.1.1"
