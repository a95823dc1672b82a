"""Tests package for permuton_lab."""
