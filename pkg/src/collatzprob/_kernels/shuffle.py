import numpy as np

from .._accel import njit


@njit(cache=True)
def partial_fisher_yates(perm, targets):
    """Swap perm[i] with perm[targets[i]] for i = 0, 1, ... in order."""
    for i in range(targets.shape[0]):
        j = targets[i]
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return perm[: targets.shape[0]].copy()
