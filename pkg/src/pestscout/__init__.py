"""Field scouting simulator: plant grid, overnight pest spread, robot sampling policies."""

__version__ = "0.1.0"
