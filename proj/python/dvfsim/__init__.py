"""DVFS scheduling simulator for blocked Cholesky/LU/QR task graphs."""

import json as _json

from ._dvfsim import (  # noqa: F401
    ConfigError,
    DomainError,
    PowerParams,
    PredictorState,
    ProtocolError,
    SimTrace,
    TaskGraph,
    TaskRef,
    compare,
    compute_slack,
    energy_cp_stretch,
    energy_race_to_halt,
    energy_ratio,
    gear_table,
    gear_tables,
    generate_crit_path,
    generate_graph,
    graph_from_json,
    ideal_frequency,
    map_owner,
    metrics,
    node_power,
    past_predict,
    policies,
    relax_predict,
    split_schedule,
    stretch_voltage,
)
from ._dvfsim import _simulate


def simulate(config):
    """Run one simulation. `config` is a config dict or its JSON text."""
    if isinstance(config, dict):
        config = _json.dumps(config)
    return _simulate(config)
