"""Instance files and per-instance bound evaluation.

An instance file is JSON: ``{"instances": [record, ...]}`` where each record
stores its tables as ``{"shape": [...], "values": [...]}`` in row-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .discrete import (
    DiscreteJoint,
    Encoder,
    IBInstance,
    SideInfoModel,
    VariationalDecoder,
    communication_upper_bound,
    exp_weight,
    joint_xz,
    joint_zy,
    mutual_information,
    random_instance,
    variational_lower_bound,
)


def _table(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "values": a.ravel().tolist()}


def _array(doc: dict) -> np.ndarray:
    return np.asarray(doc["values"], dtype=float).reshape(doc["shape"])


def instance_to_dict(inst: IBInstance, instance_id: int) -> dict:
    return {
        "id": instance_id,
        "p_xy": _table(inst.joint.p_xy),
        "encoder": _table(inst.encoder.p_z_given_x),
        # the stored decoder is already floored and renormalised
        "decoder": _table(inst.decoder.q_y_given_z),
        "p_v_given_z": _table(inst.side.p_v_given_z),
        "q_z_given_v": _table(inst.side.q_z_given_v),
        "q_v": _table(inst.side.q_v),
        "w_k": inst.w_k,
        "w0": inst.w0,
    }


def instance_from_dict(doc: dict) -> IBInstance:
    """Rebuild an instance; table invariants raise ``ValueError`` naming the table."""
    return IBInstance(
        joint=DiscreteJoint(_array(doc["p_xy"])),
        encoder=Encoder(_array(doc["encoder"])),
        decoder=VariationalDecoder(_array(doc["decoder"])),
        side=SideInfoModel(_array(doc["p_v_given_z"]), _array(doc["q_z_given_v"]), _array(doc["q_v"])),
        w_k=float(doc["w_k"]),
        w0=float(doc.get("w0", 1.0)),
    )


def save_instances(path: str | Path, instances: list[IBInstance]) -> None:
    doc = {"instances": [instance_to_dict(inst, i) for i, inst in enumerate(instances)]}
    Path(path).write_text(json.dumps(doc) + "\n")


def load_instance_records(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text())["instances"]


def random_instances(seed: int, n: int) -> list[IBInstance]:
    rng = np.random.default_rng(seed)
    return [random_instance(rng) for _ in range(n)]


@dataclass(frozen=True)
class BoundCheck:
    instance_id: int
    exact_mi: float  # I(Z;Y), bits
    lower_bound: float  # variational lower bound on I(Z;Y), bits
    weighted_ixz: float  # e^(w0 - w_k) I(X;Z), bits
    upper_bound: float  # communication upper bound, bits

    @property
    def lower_slack(self) -> float:
        return self.exact_mi - self.lower_bound

    @property
    def upper_slack(self) -> float:
        return self.upper_bound - self.weighted_ixz

    @property
    def slack(self) -> float:
        """Smaller of the two slacks; negative means a bound is violated."""
        return min(self.lower_slack, self.upper_slack)


def check_bounds(inst: IBInstance, instance_id: int = 0) -> BoundCheck:
    j, enc = inst.joint, inst.encoder
    izy = mutual_information(joint_zy(j, enc))
    ixz = mutual_information(joint_xz(j.p_x, enc))
    return BoundCheck(
        instance_id,
        izy,
        variational_lower_bound(j, enc, inst.decoder),
        exp_weight(inst.w_k, inst.w0) * ixz,
        communication_upper_bound(enc, j.p_x, inst.side, inst.w_k, inst.w0),
    )
