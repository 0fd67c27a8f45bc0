"""Sweep for the fig6 preset; writes a CSV (see `shiftlab sweep --dump-preset fig6`)."""

from _common import run_preset

if __name__ == "__main__":
    run_preset("fig6", "fig6.csv")
