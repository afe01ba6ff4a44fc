"""Risk monitoring and mitigation over network configurations."""
