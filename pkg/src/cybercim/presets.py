"""Parameter sets for the three experiment families.

``cdma`` is the detector experiment, ``cs-random`` the random compressed
sensing one and ``cs-image`` the Haar/DFT image reconstruction.  The image
threshold is swept in practice; 0.1 is only a starting value.
"""

import copy

from .errors import ValidationError

__all__ = ["PRESETS", "preset"]

_OPEN_CS = {"dt": 0.1, "p_max": 1.5, "chi": "absolute", "k_gain": 0.25, "n_step": 51, "gs2": 1e-7}

PRESETS = {
    "cdma": {
        "open-loop": {"dt": 0.1, "p_max": 2.0, "chi": "identity", "k_gain": 0.5, "n_step": 101, "gs2": 1e-7},
        "closed-loop": {"dt": 0.02, "p_tr": 1.0, "dp": 0.6, "beta": 1.0, "tau": 1.0, "k_gain": 0.1, "n_step": 501},
    },
    "cs-random": {
        "open-loop": dict(_OPEN_CS),
        "closed-loop": {"dt": 0.02, "p_tr": 1.0, "dp": 0.4, "beta": 1.0, "tau": 1.0, "k_gain": 0.1, "n_step": 1001},
        "sor": {"dt": 0.3, "n_step": 1001},
        "threshold": {"eta_init": 0.8, "eta_end": 0.18, "n_outer": 51},
    },
    "cs-image": {
        "open-loop": dict(_OPEN_CS),
        "closed-loop": {"dt": 0.02, "p_tr": 1.0, "dp": 0.6, "beta": 1.0, "tau": 1.0, "k_gain": 0.1, "n_step": 501},
        "sor": {"dt": 0.1, "n_step": 1001},
        "threshold": {"eta_init": 0.1, "eta_end": 0.1, "n_outer": 11},
    },
}


def preset(name):
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}, choose from {sorted(PRESETS)}", "preset")
    return copy.deepcopy(PRESETS[name])
