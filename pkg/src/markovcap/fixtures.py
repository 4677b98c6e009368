"""Regression targets for the three reference channels."""

from __future__ import annotations

# (k, theta_k, f_k'(theta_k), f_k(theta_k)) for the Gilbert-Elliott run from theta0 = 0.2
GE_TABLE = [
    (7, 0.28824, 0.360645, 0.327527),
    (8, 0.378401, 0.104901, 0.347958),
    (9, 0.404626, 0.0427187, 0.349884),
    (10, 0.415306, 0.0186297, 0.350211),
    (11, 0.417635, 0.0134652, 0.350248),
    (12, 0.421001, 0.00605356, 0.350281),
    (13, 0.422514, 0.00274205, 0.350288),
    (14, 0.4232, 0.0012462, 0.350289),
    (15, 0.423511, 0.000567221, 0.350289),
    (16, 0.423653, 0.000258353, 0.350289),
]
GE_COLUMNS = ("k", "theta", "grad", "f")

BEC = {
    "theta_final": 0.395485,
    "f_final": 0.442239,
    "interval": (0.4422382, 0.4422398),
    "eta": 0.767,
    "birch": 0.442329,
    "birch_pq": (0.597275, 0.614746),
    "f100_bracket": (0.442239, 0.442240),
    "boundary_gap": 0.414483,
}

NOISELESS = {
    "theta_final": 0.6257911,
    "f_final": 0.4292892,
    "interval": (0.4291146, 0.4294638),
    "eta": 0.901061,
    "birch": 0.513259,
    "birch_pq": (0.674521, 0.595176),
    "shannon": 0.562399,
}

FIXTURES = {
    "ge": (GE_COLUMNS, GE_TABLE),
    "bec": (("quantity", "value"), [(k, v) for k, v in BEC.items()]),
    "noiseless": (("quantity", "value"), [(k, v) for k, v in NOISELESS.items()]),
}
