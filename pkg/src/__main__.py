"""`python -m src` runs the RE-ABC command line."""

from src.main import cli

cli(prog_name="python -m src")
