from .bandit import (
    AgentTables,
    ArmStats,
    RoundAudit,
    communication_round,
    kappa_arm,
    round_bytes,
    ucb_argmax,
    ucb_value,
)
from .constraints import (
    CameraToEdge,
    Constraints,
    EdgeToFusion,
    PathDelays,
    SuperArm,
    Violation,
    check_constraints,
    zeroed_cameras,
)
from .engine import (
    RegretLog,
    RewardTable,
    SlotOutcome,
    candidate_arms,
    evaluate_slot,
    new_agents,
    oracle_best,
    run_experiment,
    score_super_arm,
    step,
    ucb_actions,
)
from .network import (
    OFF,
    Environment,
    Network,
    SlotState,
    canonical_network,
    canonical_world,
    profile_super_arm,
    super_arm_profile,
)
