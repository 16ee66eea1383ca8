"""Test-Paket."""
