"""Joyce structures from a potential W(z, theta), and the wall-crossing algebra behind them.

Submodules:
  lattice        charge lattice, skew form, central charge, active rays
  torus          truncated character series, Poisson/star/Moyal products
  wallcross      DT/BPS data, Stokes automorphisms, sector products
  jets           exact potentials and order-4 jets
  hk             hyperkahler data, Plebanski residuals, connection and curvature
  axioms         J1-J5 checks, gauge simplification, builder W from a flow
  isomonodromy   torus-valued isomonodromic flows
  glstokes       gl(n) Stokes factors and isomonodromic deformations
  cli            command-line front end
"""

from .axioms import (
    AxiomReport,
    JoyceCandidate,
    SamplePlan,
    build_W_from_F,
    check_J1_J2,
    check_J3,
    check_J4,
    check_J5,
    gauge_simplify,
    linearised_connection,
    point_residual,
)
from .glstokes import GLConnection, extract_stokes_factor, gl_flat_section, isomonodromic_deformation
from .hk import build_hk, curvature, levi_civita, plebanski_residual, symplectic_forms, twistor_distribution
from .isomonodromy import FlowState, classical_flow_rhs, integrate_flow, quantum_flow_rhs
from .jets import Jet4, Potential, PotentialTerm, derive, eval_jet
from .lattice import CentralCharge, Lattice, Ray, active_rays, pairing
from .torus import CharacterSeries, ConeTruncation, moyal_bracket, poisson_bracket, star_product
from .wallcross import DTData, TorusAutomorphism, dt_from_omega, omega_from_dt, sector_product, stokes_factor, verify_wall_crossing

__version__ = "0.1.0"
