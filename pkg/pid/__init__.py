# Preorder-based Partial Information Decomposition Package
from pid.probcore import Alphabet, Dist, JointSystem, JointTable, joint_to_system, mutual_information
from pid.channels import Channel, compose, join_meet
from pid.preorders import (check_degradation, check_ds_bounded, check_less_noisy_sampled, check_more_capable_sampled,
                           check_relation, check_supermodular_reachable)
from pid.optimize import OptimizerConfig, maximize_mi
from pid.measures import MeasureKind, decompose_all, gk_common_variable, ii_measure, measure_chain, pid_decompose
