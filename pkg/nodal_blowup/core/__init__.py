"""
Core numerics - nonlinearities, radial integration, shooting, energies and blow-up diagnostics
"""
