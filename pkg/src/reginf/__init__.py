"""Desk-scale toolkit for metric regularity of set-valued mappings at infinity."""

__version__ = "0.1.0"
