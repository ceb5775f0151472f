"""Robust vector polynomial optimization via joint+marginal approximations and utopia-point scalarization."""
