"""
Experiment commands behind the nbl command line
"""
