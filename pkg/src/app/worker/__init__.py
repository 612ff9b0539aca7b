"""Sequence runner and tensor dump rendering."""
