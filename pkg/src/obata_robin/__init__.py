"""Numerical toolkit for the Obata equation on spherical model domains with Robin or Neumann data."""

from .errors import (BracketError, ClusteringError, CriticalStartError, NotOnBoundaryError, ParameterError,
                     SingularFamilyError, SolverError)
from .geometry import ModelDomain, ObataFunction, RobinParameter, make_model_domain
from .flows import FlowTrace, normalized_gradient_flow
from .spectral import SturmLiouvilleProblem, smallest_eigenvalue
from .jets import BoundaryData, BoundaryJet, jet_extend, jets_match

__version__ = "0.1.0"
