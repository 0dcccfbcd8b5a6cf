"""Numerical core: spaces, c-conjugation, monotone relations, selfdual
Lagrangians, Hamiltonians, symmetric transport and inversion."""
