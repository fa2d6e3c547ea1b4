"""Rank C2C marketplace websites for selling an item.

Given an item's description, category and desired price, the engine ranks
candidate selling websites either by the quantity / average price of
similar posts (topic-space cosine similarity) or by Random-Forest votes.
"""

__version__ = "0.1.0"
