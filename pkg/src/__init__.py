"""
City Excellence Pipeline

Locates geographic centers of research excellence from bibliographic records
and writes map overlays for them.
"""

__version__ = "1.0.0"
