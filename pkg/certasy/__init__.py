"""
certasy: expansões assintóticas certificadas para sequências P-recursivas.
"""
__version__ = "0.1.0"
