"""Core simulation, control and evaluation modules."""
