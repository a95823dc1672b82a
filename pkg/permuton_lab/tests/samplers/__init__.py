"""Samplers sub-module for the tests package for permuton_lab."""
