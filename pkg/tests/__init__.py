"""Unit test package for floquetlab."""
