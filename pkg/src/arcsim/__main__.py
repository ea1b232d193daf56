"""Allow `python -m arcsim` as an alternative to the console script."""

from arcsim.cli import console_main

console_main()
