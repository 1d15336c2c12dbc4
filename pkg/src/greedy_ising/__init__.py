"""Forward-backward greedy sparse estimation and Ising graph structure learning."""

__version__ = "0.1.0"

from .greedy import (  # noqa: E402
    GreedyConfig,
    GreedyResult,
    GreedyTrace,
    ParamVector,
    backward_scan,
    forward_search,
    refit,
    run_greedy,
)
from .ising import (  # noqa: E402
    GibbsSettings,
    IsingModel,
    SampleMatrix,
    assign_couplings,
    exact_distribution,
    gibbs_sample,
    make_chain,
    make_grid4,
    make_star,
)
from .losses import NodeConditionalLogisticLoss, SmoothLoss, SquaredLoss  # noqa: E402
from .structure import (  # noqa: E402
    CombineRule,
    EdgeSet,
    combine,
    greedy_neighborhood,
    l1_logistic_neighborhood,
    learn_structure,
    learn_structure_l1,
)
