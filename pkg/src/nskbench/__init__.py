# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Spherically symmetric Navier-Stokes-Korteweg workbench in Lagrangian mass coordinates."""

__version__ = "0.1.0"
