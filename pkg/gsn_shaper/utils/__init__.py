"""gsn-shaper utilities."""
