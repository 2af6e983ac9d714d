"""Random walks on countable groups: constructive boundary-criterion
measures, Powers-style conjugation averaging, and certified reduced
C*-norm estimates at desk scale.
"""

from .errors import ResourceError, UsageError
from .groups import (
    AmenableWitness,
    CyclicGroup,
    Element,
    FolnerCheck,
    FreeGroup,
    FreeTimesCyclic,
    Group,
    IntLattice,
    Lamplighter,
    central_cyclic_witness,
    conjugate_element,
    enumerate_elements,
    folner_invariance_check,
    folner_set,
    group_from_config,
    lamp_subgroup_witness,
    multiply,
    trivial_witness,
    whole_group_witness,
    witness_from_config,
    word_ball,
)

__all__ = [
    "AmenableWitness",
    "CyclicGroup",
    "Element",
    "FolnerCheck",
    "FreeGroup",
    "FreeTimesCyclic",
    "Group",
    "IntLattice",
    "Lamplighter",
    "ResourceError",
    "UsageError",
    "central_cyclic_witness",
    "conjugate_element",
    "enumerate_elements",
    "folner_invariance_check",
    "folner_set",
    "group_from_config",
    "lamp_subgroup_witness",
    "multiply",
    "trivial_witness",
    "whole_group_witness",
    "witness_from_config",
    "word_ball",
]
