"""
Core utilities: constants, the exception hierarchy and logging setup.
"""
