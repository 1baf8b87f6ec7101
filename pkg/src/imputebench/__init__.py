"""Missing-data imputation benchmark harness.

Amputation (MCAR/MAR/MNAR), classical imputers, a prompt-based imputation
protocol with retries and fallback, and NRMSE-based reporting.
"""

__version__ = "0.1.0"
