"""Fedosov workbench application package."""
