"""Scenario registry, experiment harness and command-line interface."""
from .scenarios import Scenario, export_scenario, list_scenarios, load_scenario

__all__ = ["Scenario", "export_scenario", "list_scenarios", "load_scenario"]
