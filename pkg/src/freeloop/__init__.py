"""freeloop: numerics for loop algebras of weighted pointed graphs."""

__version__ = "0.1.0"

from .graphs import (
    GraphSpecError,
    SimplicityWarning,
    WeightedPointedGraph,
    affine_d,
    ball,
    build_graph,
    d_infty,
    directed_double,
    dynkin_a,
    dynkin_a_infty,
    find_pointed_isomorphism,
    loop_bouquet,
    quantum_integer,
    simplicity_check,
    verify_local_uniform_convergence,
)
from .fock import (
    BasisSizeError,
    GradedOperator,
    InsufficientDepthError,
    PathBasis,
    annihilation,
    cond_expectation,
    creation,
    edge_element,
    enumerate_paths,
    moments,
    trace_Tr,
    vertex_projector,
)
from .loops import (
    AlgebraElement,
    GnsWorkspace,
    LoopBasis,
    act_on_gns,
    change_of_basis,
    enumerate_loops,
    l2_norm,
    loop_gram,
    number_operator,
    random_homogeneous,
    tr0,
    wick_direct,
    wick_recursive,
)
from .lipnorms import (
    adjusted_lip,
    commutator_norm,
    haagerup_sweep,
    haagerup_verify,
    minkowski_oracle,
    tail_decompose,
)
from .convexity import convergence_experiment, hausdorff_distance
from .temperley import (
    NcPairing,
    TLElement,
    catalan_number,
    derivation,
    derivation_adjoint,
    enumerate_pairings,
    gram_matrix,
    star_product,
    theta_sum,
    tl_trace,
)
