"""Multi-type Ehrenfest quasi-birth-death process with catastrophes."""
__version__ = "0.1.0"
