"""Market-making RL workbench.

Reconstructs limit order books from recorded exchange event streams,
simulates order matching, and trains/evaluates a two-agent deep Q-learning
system (minute-scale buy/sell/hold plus intra-minute limit-order placement)
against benchmark strategies.
"""

from .types import EventKind, Fill, MarketEvent, Side, TickBar

__all__ = ["EventKind", "Fill", "MarketEvent", "Side", "TickBar"]
__version__ = "0.1.0"
