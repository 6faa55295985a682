"""Force-based contact-state estimation for cables pushed into clip fixtures."""
__version__ = "0.1.0"
