"""Floorplan propagation, spatial signatures and clustering."""
