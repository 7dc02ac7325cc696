"""
Tests for ss_texture.

The slow full-size learning curve is marked `slow`; run `pytest -m "not slow"` to skip it.
"""
