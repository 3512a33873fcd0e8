"""
Conditional replay of stored click records.
"""

import logging
from typing import Any, Dict, List

from core.hamiltonians import joint_operators
from core.statistics import negativity
from core.storage import ArtifactStore
from core.trajectory import replay_conditional
from models.records import ClickRecord
from pipelines.common import Setup, checkpoint_grid

logger = logging.getLogger(__name__)


def replay_records(
    records: List[ClickRecord],
    setup: Setup,
    store: ArtifactStore,
    sample_dt: float = 1.0,
    strict: bool = True,
) -> Dict[str, Any]:
    """Occupations and negativity of the conditional state of each record on a uniform grid."""
    ops = joint_operators(setup.space)
    summary: Dict[str, Any] = {}
    for i, record in enumerate(records):
        times = checkpoint_grid(record.t_end, sample_dt)
        states = replay_conditional(record, setup.params, setup.space, setup.initial, times, setup.control, strict)
        rows = [
            [float(t), float(s.expect(ops.n_a).real), float(s.expect(ops.n_b).real), negativity(s, setup.space)]
            for t, s in zip(times, states)
        ]
        name = f"replay_{i}.csv"
        store.write_csv(
            name, ["t", "n_cavity", "n_mech", "negativity"], rows,
            header={"record": record.fingerprint(), "params": setup.params.fingerprint()},
        )
        summary[name] = {"clicks": record.click_count(), "t_end": record.t_end}
        logger.info(f"Replayed record {i} ({record.click_count()} clicks) over {len(times)} points")
    return summary
