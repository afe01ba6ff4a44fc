"""Non-saturated heterogeneous CSMA/CA model and its slot-level oracle."""
