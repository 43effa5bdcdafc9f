"""Zone-level fragility and restoration-time analytics for distribution-grid
outage and weather records."""

__version__ = "0.1.0"
