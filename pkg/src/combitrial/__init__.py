"""Simulation and calibration of a Bayesian seamless phase II/III dose-combination trial."""
