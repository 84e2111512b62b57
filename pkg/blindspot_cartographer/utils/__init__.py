"""
Logging, on-disk formats and overlays
"""
