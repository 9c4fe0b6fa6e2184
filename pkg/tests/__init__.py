"""hunet test suite."""
