"""Compare the certified order-1 interval with order-2 Birch bounds over a
grid of (p, q), for the BEC or the noiseless channel."""

import argparse

import numpy as np

from markovcap import channels
from markovcap.cli import order_gain


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channel", choices=("bec", "noiseless"), default="bec")
    parser.add_argument("--points", type=int, default=9)
    args = parser.parse_args()

    base = order_gain(args.channel)
    upper = base["interval_observed"][1]
    print(f"order-1 upper end (observed steps): {upper:.9f}")
    grid = np.linspace(0.1, 0.9, args.points)
    wins = 0
    for p in grid:
        for q in grid:
            if args.channel == "bec":
                value = channels.birch_bound_bec(p, q, 0.1)
            else:
                value = channels.birch_bound_noiseless(p, q)
            wins += value > upper
    print(f"{wins} of {len(grid) ** 2} grid points beat it; reference point gives {base['birch']:.7f}")


if __name__ == "__main__":
    main()
