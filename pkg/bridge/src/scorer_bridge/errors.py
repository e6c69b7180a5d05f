class BridgeError(Exception):
    """Base class for scorer-bridge failures."""


class FormatError(BridgeError):
    """Malformed input row; message carries the file and line number."""


class ModelError(BridgeError):
    """The configured model could not be loaded."""
