# imports from flask
import sys
import click
from flask import current_app
from flask.cli import AppGroup, FlaskGroup

# import "objects" from "this" project
from __init__ import app

from api.report import ReportError, emit_report
from api.runner import RunSettings, run_scenario
from api.scenario import REPORT_FORMATS, ConfigError, load_config
from model.appendix_ode import OdeIntegrationError
from model.dynamics import DimensionCapError, SupportError

EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def report_options(config_required=True):
    """--config, --out, --format and --seed, shared by every subcommand."""
    options = [
        click.option('--config', 'config_path', required=config_required,
                     type=click.Path(exists=True, dir_okay=False), help='Scenario config (JSON)'),
        click.option('--out', 'out_dir', default=None, type=click.Path(file_okay=False), help='Report directory'),
        click.option('--format', 'fmt', default=None, type=click.Choice(REPORT_FORMATS), help='Report format'),
        click.option('--seed', default=None, type=int, help='RNG seed'),
    ]

    def decorate(command):
        for option in reversed(options):
            command = option(command)
        return command
    return decorate


def execute(subcommand, config_path, out_dir, fmt, seed):
    """Runs one subcommand, writes the report and exits nonzero on violations."""
    try:
        config = load_config(config_path, seed=current_app.config['SEED']) if config_path else None
        settings = RunSettings.from_app(current_app.config, config=config, seed=seed)
        rows = run_scenario(config, subcommand, settings)
        outputs = config.outputs if config else {}
        out_dir = out_dir or outputs.get('dir') or current_app.config['OUTPUT_DIR']
        fmt = fmt or outputs.get('format') or current_app.config['REPORT_FORMAT']
        stem = f"{config.name if config else 'builtin'}_{subcommand.replace('-', '_')}"
        paths = emit_report(rows, out_dir, stem, fmt)
    except (ConfigError, DimensionCapError, SupportError, ReportError) as e:
        current_app.logger.error(f"{subcommand}: {e}")
        sys.exit(EXIT_CONFIG)
    except OdeIntegrationError as e:
        current_app.logger.error(f"{subcommand}: {e}")
        sys.exit(EXIT_VIOLATION)

    violations = [row for row in rows if row.violation]
    for row in violations:
        current_app.logger.error(f"Violation: {row.kind} t={row.t} a={row.a} "
                                 f"measured={row.measured:.12g} certificate={row.certificate:.12g}")
    click.echo(f"{subcommand}: {len(rows)} rows, {len(violations)} violations -> {', '.join(paths)}")
    if violations:
        sys.exit(EXIT_VIOLATION)


# Lieb-Robinson certificate commands
lr_cli = AppGroup('lr', help='Certificate checks for propagation bounds')


@lr_cli.command('constants')
@report_options()
def constants(config_path, out_dir, fmt, seed):
    """||F||, C, their tilted values and ||Phi||_a per tilt."""
    execute('constants', config_path, out_dir, fmt, seed)


@lr_cli.command('lr-check')
@report_options()
def lr_check(config_path, out_dir, fmt, seed):
    """Measured commutator norms against the propagation bound and its exponential form."""
    execute('lr-check', config_path, out_dir, fmt, seed)


@lr_cli.command('correlations')
@report_options()
def correlations(config_path, out_dir, fmt, seed):
    """Product-state correlations against both correlation bounds, plus decoupling checks."""
    execute('correlations', config_path, out_dir, fmt, seed)


@lr_cli.command('converge')
@report_options()
def converge(config_path, out_dir, fmt, seed):
    """Finite-volume differences against the convergence certificate."""
    execute('converge', config_path, out_dir, fmt, seed)


@lr_cli.command('velocity')
@report_options()
def velocity(config_path, out_dir, fmt, seed):
    """Propagation velocity and the optimal tilt."""
    execute('velocity', config_path, out_dir, fmt, seed)


@lr_cli.command('localize')
@report_options()
def localize(config_path, out_dir, fmt, seed):
    """Haar-localized evolution against the localization bound."""
    execute('localize', config_path, out_dir, fmt, seed)


@lr_cli.command('ode-check')
@report_options(config_required=False)
def ode_check(config_path, out_dir, fmt, seed):
    """Norm-preserving flow suite and the perturbation bound."""
    execute('ode-check', config_path, out_dir, fmt, seed)


app.cli.add_command(lr_cli)

cli = FlaskGroup(create_app=lambda: app)

# this runs the command line interface, e.g. python main.py lr lr-check --config ...
if __name__ == "__main__":
    cli()
