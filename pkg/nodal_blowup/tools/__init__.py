"""
Verification checks and their registry
"""
