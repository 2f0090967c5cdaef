"""Time and power allocation for full- and half-duplex wireless-powered networks."""

from .model import (Allocation, ChannelState, SolverResult, SystemParams, effective_si,
                    weighted_sum_rate)

__all__ = ["Allocation", "ChannelState", "SolverResult", "SystemParams", "effective_si",
           "weighted_sum_rate"]
__version__ = "0.1.0"
