"""Test suite for adaptive-placement."""
