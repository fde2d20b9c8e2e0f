"""Truncated signature and logsignature transforms of streams of data."""

from .backward import (
    SignatureGradient,
    fused_exp_mul_backward,
    fused_mul_exp_backward,
    mul_backward,
    signature_backward,
)
from .cost_model import conventional_cost, counted_fused_mul_exp, fused_cost
from .estimators import LogSignatureTransformer, SignatureTransformer, check_streams
from .logsignature import LOGSIG_MODES, logsignature, logsignature_backward, logsignature_channels
from .lyndon import (
    LyndonBasisIndex,
    basis_index,
    enumerate_lyndon_words,
    lyndon_reconstruct,
    lyndon_triangular_solve,
    mobius,
    phi_expand,
    psi_project,
    standard_factorization,
    witt_dimension,
)
from .path import PathIndex
from .signature import (
    SignatureOptions,
    batch_signature,
    increments,
    multi_signature_combine,
    signature,
    signature_combine,
)
from .tensor_algebra import (
    FreeTensor,
    TruncationSpec,
    fused_exp_mul,
    fused_mul_exp,
    group_inverse,
    group_mul,
    outer_product,
    signature_length,
    tensor_exp,
    tensor_log,
)

__version__ = "0.1.0"
