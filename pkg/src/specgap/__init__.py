"""specgap: Hill-operator spectral invariants of singular metric data.

Library layers: Courant-algebroid preframes, sinc normal forms, deep
smoothing kernels, Hill-operator Floquet theory, finite-genus period
matrices and theta functions, the Kerr pipeline, Cartan torsion of lifted
coframes, and the collapse/evaporation dynamics, plus a CLI binding them.
"""

__version__ = "0.1.0"

from .gridfield import Chart, field_to_csv, load_field, save_field
from .hill import (HillPotential, SpectrumBundle, discriminant,
                   isospectral_check, monodromy, periodic_spectrum,
                   reflecting_spectrum, rescale_period, tied_spectrum)
from .curves import (CurveModel, PeriodMatrix, b_periods, compare_invariants,
                     its_matveev_reconstruct, normalized_basis,
                     period_matrix, theta, truncate_curve)
from .kerr import KerrParams, kerr_metric, kerr_r
from .normal_form import MetricCoefficient, NormalForm, sinc
from .preframe import (CourantSection, Preframe, bundle_map, courant_bracket,
                       courant_pairing, is_preframe)
from .smoothing import DeepKernel, deep_kernel_coefficients, smooth

__all__ = [name for name in dir() if not name.startswith("_")]
