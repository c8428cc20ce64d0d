"""Solvers and verifiers for smooth Nash equilibria of normal-form games."""
