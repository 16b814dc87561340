"""Quantized minimum error entropy (QMEE) learning.

The quantized information potential replaces the inner sum of the O(N^2)
Parzen estimate with a sum over a small online codebook of the errors,
giving O(MN) cost. Submodules:

``quantizer``  online vector quantizer and codebooks
``criteria``   kernels, information potentials, MSE and correntropy costs
``solvers``    fixed-point linear regression under MSE/MCC/MEE/QMEE
``elm``        extreme learning machine with RELM and QMEE output training
``esn``        echo state network with RMSProp-trained QMEE readout
``datagen``    synthetic data, Mackey-Glass series, CSV loading
``bench``      experiment runner and ``qmee-bench`` CLI
"""

from .criteria import (Criterion, CriterionSpec, correntropy_cost, gaussian_kernel,
                       information_potential, kernel_weights, mse_cost, parzen_density,
                       qmee_potential)
from .quantizer import Codebook, QuantizationResult, nearest_word, quantize_stream
from .solvers import (FixedPointConfig, LinearModel, SingularSystemError, TrainTrace,
                      rmse_weights, solve_fixed_point_mcc, solve_fixed_point_mee,
                      solve_fixed_point_qmee, solve_mse)

__version__ = "0.1.0"

__all__ = [
    "Codebook", "QuantizationResult", "quantize_stream", "nearest_word",
    "Criterion", "CriterionSpec", "gaussian_kernel", "parzen_density", "information_potential",
    "qmee_potential", "kernel_weights", "mse_cost", "correntropy_cost",
    "FixedPointConfig", "LinearModel", "SingularSystemError", "TrainTrace", "rmse_weights",
    "solve_mse", "solve_fixed_point_qmee", "solve_fixed_point_mee", "solve_fixed_point_mcc",
]
