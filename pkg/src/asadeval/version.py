"""Single source of the tool version embedded in reports and manifests."""

__version__ = "0.1.0"
