"""gnnmeter: dual-formulation GNN execution with exact cost metering and a
deterministic simulator of partition-parallel, bounded-staleness execution."""

from .costs import CostReport, OpCounter, check_asymptotic, comm_volume, measure_depth, measure_work
from .errors import GnnMeterError
from .gl import SolveReport, gl_forward, masked_gram, poly_apply, rational_apply, spmm
from .graph import (
    Graph,
    Partitioning,
    SampledSubgraph,
    SparseOperator,
    build_csr,
    neighbor_split,
    normalize,
    partition,
    sample_neighborhood,
)
from .lc import LayerOutput, aggregate, eval_phi, eval_psi, lc_forward, lc_layer
from .models import DUAL_MODELS, GL_MODELS, LC_MODELS, MODELS, ModelSpec, make_spec
from .sim import (
    CostParams,
    StalenessConfig,
    Trace,
    VersionedBuffer,
    pipeline_metrics,
    run_async,
    run_async_training,
    run_sync,
)
from .train import (
    GradientSet,
    Labels,
    finite_diff_grad,
    gcn_backward,
    gcn_forward_cached,
    sgd_step,
    softmax_xent,
    train_full_batch,
)

__version__ = "0.1.0"
