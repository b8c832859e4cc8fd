import itertools
import logging
from typing import Callable, Dict, Optional

import numpy as np

from pid.channels import Channel
from pid.errors import UnknownNameError
from pid.measures import copy_target_system
from pid.probcore import Alphabet, Dist, JointSystem, JointTable, joint_to_system, system_from_channels

logger = logging.getLogger(__name__)

# Körner-Marton counterexample 1 (p = 0.25, eps = 0.2, delta = 0.1): K2 ⪯_ln K1 but not K2 ⪯_d K1.
KORNER_K1 = ((0.25, 0.75), (0.35, 0.65))
KORNER_K2 = ((0.675, 0.325), (0.745, 0.255))
KORNER_MARGINAL = (0.4, 0.6)

# K4 = ⋄(1,2) K3, so K4 ⪯_ds K3, yet K4 is not a garbling of K3.
JOINMEET_K3 = ((1.0, 0.0), (0.0, 1.0), (0.5, 0.5))
JOINMEET_K4 = ((1.0, 0.0), (1.0, 0.0), (0.5, 0.5))
JOINMEET_MARGINAL = (0.3, 0.3, 0.4)

# Input pairs on which the chi^2 criterion separates K3 and K4 in each direction.
K4_NOT_LN_K3_PAIR = ((0.0, 0.0, 1.0), (0.1, 0.1, 0.8))
K3_NOT_LN_K4_PAIR = ((0.0, 1.0, 0.0), (0.1, 0.0, 0.9))

# Published I∩ values for the built-in systems, keyed by measure; None where no number is given.
PUBLISHED_VALUES: Dict[str, Dict[str, Optional[float]]] = {
    'and': {'gh': 0.0, 'd': 0.311, 'ln': 0.311, 'ds': 0.311, 'mc': 0.311, 'mmi': 0.311},
    'sum': {'gh': 0.0, 'd': 0.5, 'ln': 0.5, 'ds': 0.5, 'mc': 0.5, 'mmi': 0.5},
    'unq': {'gh': 0.0, 'd': 0.0, 'ln': 0.0, 'ds': 0.0, 'mc': 0.0, 'mmi': 0.0},
    'copy-target': {'gh': 0.0, 'd': 0.0, 'ln': 0.0, 'ds': 0.0, 'mc': 0.0, 'mmi': 1.0},
    'cex1': {'gh': 0.0, 'd': 0.002, 'ln': 0.004, 'ds': None, 'mc': 0.004, 'mmi': 0.004},
    # ln = 0 is only conjectured for this system
    'cex2-ds': {'gh': 0.0, 'd': 0.0, 'ln': None, 'ds': 0.322, 'mc': 0.322, 'mmi': 0.322},
}


def gate_system(gate: Callable[[int, int], int], n_outputs: int) -> JointSystem:
    """T = gate(Y1, Y2) for independent, uniform binary inputs."""
    probs = np.zeros((n_outputs, 2, 2))
    for y1, y2 in itertools.product(range(2), repeat=2):
        probs[gate(y1, y2), y1, y2] += 0.25
    axes = (Alphabet.of_size(n_outputs), Alphabet.of_size(2), Alphabet.of_size(2))
    return joint_to_system(JointTable(axes, probs))


def and_system() -> JointSystem:
    return gate_system(lambda a, b: a & b, 2)


def sum_system() -> JointSystem:
    return gate_system(lambda a, b: a + b, 3)


def unq_system() -> JointSystem:
    return gate_system(lambda a, b: a, 2)


def copy_source_table(probs=((0.25, 0.25), (0.25, 0.25))) -> JointTable:
    """p(y1, y2) for the copy target; uniform independent binary inputs by default."""
    probs = np.asarray(probs, dtype=float)
    return JointTable(tuple(Alphabet.of_size(s) for s in probs.shape), probs, ('Y1', 'Y2'))


def copy_target_example() -> JointSystem:
    return copy_target_system(copy_source_table())


def cex1_system() -> JointSystem:
    p_t = Dist.from_probs(KORNER_MARGINAL)
    return system_from_channels(p_t, [Channel.from_rows(KORNER_K1), Channel.from_rows(KORNER_K2)])


def cex2_ds_system() -> JointSystem:
    p_t = Dist.from_probs(JOINMEET_MARGINAL)
    return system_from_channels(p_t, [Channel.from_rows(JOINMEET_K3), Channel.from_rows(JOINMEET_K4)],
                                names=('T', 'Y3', 'Y4'))


BUILTIN_EXAMPLES: Dict[str, Callable[[], JointSystem]] = {
    'and': and_system,
    'sum': sum_system,
    'copy-target': copy_target_example,
    'unq': unq_system,
    'cex1': cex1_system,
    'cex2-ds': cex2_ds_system,
}


def builtin_system(name: str) -> JointSystem:
    try:
        factory = BUILTIN_EXAMPLES[name]
    except KeyError:
        raise UnknownNameError(f"Unknown example {name!r}; expected one of {sorted(BUILTIN_EXAMPLES)}")
    logger.info(f"Building example system {name}")
    return factory()


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    for name in BUILTIN_EXAMPLES:
        system = builtin_system(name)
        print(f"  {name}: |T| = {system.target_alphabet.size}, sources = {system.n_sources}")
