"""Figure rendering for sykbattery experiment outputs."""

__version__ = "0.1.0"
