"""
Synthetic scenes and their on-disk formats.
"""
