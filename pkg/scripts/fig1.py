"""Sweep for the fig1 preset; writes a CSV (see `shiftlab sweep --dump-preset fig1`)."""

from _common import run_preset

if __name__ == "__main__":
    run_preset("fig1", "fig1.csv")
