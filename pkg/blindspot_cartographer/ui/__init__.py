"""
Console and raster presentation: colour schemes and report tables
"""
