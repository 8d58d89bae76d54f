# -*- coding: utf-8 -*-
"""Console output for the command line: headings, tables, check lists.

Library modules only log; everything a user reads on the terminal goes
through here.
"""
import logging
import sys

import click

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level="WARNING"):
    """Install one stream handler on the package logger."""
    logger = logging.getLogger("cycledgp")
    logger.setLevel(level.upper() if isinstance(level, str) else level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def print_heading(title, underline="-"):
    click.echo("## {}".format(title))
    click.echo(underline * max(len(title) + 3, 10))


def print_table(frame, float_format="{:.3f}"):
    """Echo a pandas DataFrame, NaN shown as a dash."""
    if frame.empty:
        click.echo("(no rows)")
        return
    text = frame.to_string(
        na_rep="-",
        float_format=lambda value: float_format.format(value),
    )
    click.echo(text)


def print_checks(checks):
    """Echo verify results, one line per check."""
    for check in checks:
        mark = "ok  " if check.passed else "FAIL"
        line = "[{}] {}".format(mark, check.name)
        if check.detail:
            line += " - {}".format(check.detail)
        click.echo(line)
