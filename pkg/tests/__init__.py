"""Unit tests for novas."""
