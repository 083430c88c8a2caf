"""Deterministic numerics for coherent-state discrimination and CV-QKD.

Subpackages by subject:

* :mod:`cvq.gaussian` -- covariance-matrix calculus, Fock expansion,
  Wigner functions, thermal-loss capacities;
* :mod:`cvq.detectors` -- PNR(M) statistics, homodyne-like detection,
  MAP thresholds;
* :mod:`cvq.binary` / :mod:`cvq.mary` -- BPSK and QPSK receivers;
* :mod:`cvq.qkd` -- GG02, PSK, QAM, trusted-device and wiretap rates;
* :mod:`cvq.amplifiers` -- multi-span PIA/PSA links, NLAs, PLOB bound;
* :mod:`cvq.kor` -- the key-rate-optimized discrimination receiver;
* :mod:`cvq.cli` / :mod:`cvq.experiments` -- figure-data reproduction.
"""

__version__ = "0.1.0"

from . import amplifiers, binary, detectors, gaussian, kor, mary, numerics, qkd

__all__ = [
    "amplifiers",
    "binary",
    "detectors",
    "gaussian",
    "kor",
    "mary",
    "numerics",
    "qkd",
    "__version__",
]
