"""Error-handling vocabulary and the two interchangeable strategy implementations."""
