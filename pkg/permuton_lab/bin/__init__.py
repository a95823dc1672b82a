"""Bin scripts."""
