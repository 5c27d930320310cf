"""Fixture plugins registered from conftest.py."""
