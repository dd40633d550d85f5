"""
Services module
Spectral front ends, the victim classifier, attacks and evaluation
"""
