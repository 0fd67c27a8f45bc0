"""Sweep for the fig5 preset; writes a CSV (see `shiftlab sweep --dump-preset fig5`)."""

from _common import run_preset

if __name__ == "__main__":
    run_preset("fig5", "fig5.csv")
