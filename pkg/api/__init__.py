"""
Scenario plumbing between the model package and the CLI: config parsing,
the subcommand runner and report emission.
"""

__all__ = []
