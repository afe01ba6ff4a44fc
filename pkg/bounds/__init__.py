"""Feasibility screens: Shannon layer, saturation bounds, AP/band margins."""
