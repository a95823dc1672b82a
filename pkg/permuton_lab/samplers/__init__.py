"""Samplers package for permuton_lab."""
