"""
RWI allocation simulator - core modules
Two-choice bin table with random walk insertion, D/D' bookkeeping,
saturated-set analysis and the experiment harness
"""

__version__ = "1.0.0"
__author__ = "RWI Simulation Team"

# Import modules as needed: from src.core_table import Table
