"""
Configuration package for the RWI allocation simulator
"""

from .config import Config, config
