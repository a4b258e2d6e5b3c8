"""nsdopt tests."""
