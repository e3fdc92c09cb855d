from .discrete import (
    DiscreteJoint,
    Encoder,
    IBInstance,
    SideInfoModel,
    VariationalDecoder,
    communication_upper_bound,
    entropy,
    exact_posterior,
    exact_side_model,
    ib_objective,
    loss_l2,
    mutual_information,
    random_instance,
    variational_lower_bound,
)
from .instances import (
    BoundCheck,
    check_bounds,
    instance_from_dict,
    instance_to_dict,
    load_instance_records,
    random_instances,
    save_instances,
)
from .multiframe import GaussianARModel, fit_multiframe, gaussian_kl, loss_l3

NATS_PER_BIT = 0.6931471805599453


def bits_to_nats(x):
    return x * NATS_PER_BIT


def nats_to_bits(x):
    return x / NATS_PER_BIT
