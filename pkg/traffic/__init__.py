"""Role-based traffic generation and digital-twin futures."""
