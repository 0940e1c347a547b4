"""gcwaves: spectral tools for periodic gravity-capillary water waves.

Subpackages by responsibility:

- `fields`      periodic functions on the torus (transforms, norms, parity)
- `symbols`     paradifferential quantization, symbol composition,
                diffeomorphism flows and conjugation
- `dispersion`  linear frequencies, small divisors, resonance scans
- `dno`         the Dirichlet-Neumann operator (strip solver + parametrix)
- `dynamics`    time evolution of the full water-waves system
- `normalform`  one-step Birkhoff reduction of the scalar model equation
- `cli`         experiment runner
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
