__vers_str__ = "0.0.0"
__version__ = (0, 0, 0)

