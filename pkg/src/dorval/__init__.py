"""dorval: scenario-based safety validation of strategic intersection planners
under dynamic occlusion, with hypergame-based risk scoring and occlusion-guided
vehicle injection."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
