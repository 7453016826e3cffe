#!/usr/bin/env python3
"""Write the net of a scenario, restricted to a finite box, as a net file.

The output can be loaded back through ``net.file`` in another scenario.
With ``--table`` the embedding is written as well, one ``p iota(p)`` row
per net point.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from netembed.errors import ConfigurationError
from netembed.harness.scenario import load_scenario
from netembed.netlattice import Box, JitteredLatticeNet, Net, generate_net, save_embedding_table, save_net


def restrict(net: Net, half_width: float) -> Net:
    """The same net on ``[-half_width, half_width]^n``; nets read from files are returned as is."""
    if not isinstance(net, JitteredLatticeNet):
        return net
    box = Box.from_config([-half_width, half_width], net.dimension)
    return generate_net(net.epsilon_base, net.delta, net.jitter, net.seed, box)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(description="Export a scenario net as an 'n delta' net file")
    ap.add_argument("config", help="Scenario YAML file")
    ap.add_argument("output", help="Path of the net file to write")
    ap.add_argument("--half-width", type=float, default=10.0, help="Half width of the exported box")
    ap.add_argument("--table", default=None, help="Also write the embedding table to this path")
    args = ap.parse_args(argv)

    if args.half_width <= 0:
        ap.error("--half-width must be positive")
    try:
        scenario = load_scenario(args.config)
    except ConfigurationError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2

    net = restrict(scenario.net, args.half_width)
    save_net(net, Path(args.output))
    if args.table:
        save_embedding_table(net, scenario.embedding, Path(args.table))
    print(args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
