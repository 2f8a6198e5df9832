"""Half-space super-element for FEM/BEM modelling of seismic canyon scattering.

The package couples a plane-strain finite-element model of a canyon with a
boundary-element representation of the surrounding elastic half-space,
condensed into a single dense stiffness block on the contact surface.
"""

from ._backend import backend
from .bem import (BemOperators, BoundaryMesh, Box, Geometry, assemble_operators,
                  build_contact_mesh, build_surface_mesh, condense)
from .errors import (AssemblyError, ConfigError, DomainError, FactorizationError, HsseError,
                     MeshError, SingularEvaluationError, SynthesisError)
from .fem import FemMesh, assemble_global, mesh_canyon_domain
from .kernels import (FieldVector, KernelTensor, Material, PlaneWave, free_field, greens_t,
                      greens_u, kernel_tensor)
from .solver import (CanyonModel, RickerPulse, Scenario, Seismogram, SurfaceResponse,
                     TransferFunction, component_errors, relative_error, ricker_spectrum,
                     ricker_time, solve_frequency, synthesize_seismograms, transfer_function,
                     transfer_functions)
from .superelement import (BandedMatrix, CompressionReport, CompressionSpec, HsseMatrix,
                           assemble_khs, compress, compress_halfband, compress_threshold,
                           coupling_matrices, half_bandwidth, measure_rhbw, relative_storage,
                           symmetrize)

__version__ = "0.1.0"
