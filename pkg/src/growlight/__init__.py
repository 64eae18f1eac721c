"""Grow-light schedule optimization toolkit.

Extracts leaf area from top-view grow-bed images, fits an exponential
leaf-area growth model driven by red/blue LED intensity, EC, pH and
plant age, and searches for profit-maximizing 15-day hourly lighting
schedules under time-of-use electricity pricing with a genetic
algorithm.
"""

__version__ = "0.1.0"
