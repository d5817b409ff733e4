"""Mid-infrared heterodyne detection: noise budgets, signal-chain simulation,
spectrum-analyser readout and heterodyne interferometry."""

__version__ = "0.1.0"
