"""Sweep for the fig7 preset; writes a CSV (see `shiftlab sweep --dump-preset fig7`)."""

from _common import run_preset

if __name__ == "__main__":
    run_preset("fig7", "fig7.csv")
