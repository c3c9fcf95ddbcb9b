#!/usr/bin/env python3

""" acceptance.py
Runs the certificate checks on every shipped scenario config, twice, and
compares the CSV reports byte for byte.

Usage: Run from the terminal as such:

Goto the scripts directory:
> cd scripts; ./acceptance.py

Or run from the root of the project:
> scripts/acceptance.py

General Process outline:
1. Each (subcommand, config) pair runs into two scratch report directories.
2. Any nonzero exit status is a failure (violation or config error).
3. The two CSV files of each pair must be identical.
"""
import filecmp
import os
import sys
import tempfile

# Add the directory containing main.py to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
# Import application object
from main import app

CHECKS = [
    ('lr-check', 'tfim_chain8.json'),
    ('correlations', 'tfim_chain8.json'),
    ('localize', 'tfim_chain8.json'),
    ('converge', 'tfim_converge10.json'),
    ('ode-check', None),
]


def run_check(runner, subcommand, config_name, out_dir):
    args = ['lr', subcommand, '--out', out_dir, '--format', 'csv']
    if config_name:
        args += ['--config', os.path.join(app.config['DATA_FOLDER'], config_name)]
    result = runner.invoke(args=args)
    print(result.output.strip())
    return result.exit_code


def main():
    runner = app.test_cli_runner()
    failures = []
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        for subcommand, config_name in CHECKS:
            codes = [run_check(runner, subcommand, config_name, out) for out in (first, second)]
            if any(codes):
                failures.append(f"{subcommand} exited with {codes}")
                continue
            for name in sorted(os.listdir(first)):
                if name.endswith('.csv') and not filecmp.cmp(os.path.join(first, name),
                                                             os.path.join(second, name), shallow=False):
                    failures.append(f"{name} differs between runs")
    for failure in failures:
        print(f"FAILED: {failure}")
    print("All checks passed" if not failures else f"{len(failures)} checks failed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
