"""Audit toolkit for web-domain consent signals around AI crawling.

Subsystems: robots.txt parsing and matching (rep), the crawler agent
registry (agents), ordinal restriction classification (restrictions),
web-archive snapshot retrieval (wayback), Terms-of-Service taxonomies (tos),
token-weighted metrics and resampling statistics (metrics, stats), and
seasonal ARIMA forecasting (sarima). The cli module chains them into a
resumable pipeline.
"""

__version__ = "0.1.0"
