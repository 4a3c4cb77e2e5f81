"""Lorentz gas with infinite horizon: exact collision dynamics plus a
statistical suite for the superdiffusive limit laws (heavy-tail fits,
nonstandard CLT, generalized iterated-logarithm records, truncated-moment
probes, series convergence diagnostics)."""

__version__ = "0.1.0"

from .billiard import (BilliardTable, CollisionOutcome, PhasePoint,
                       TrajectorySummary, birkhoff, build_table, collide,
                       corridor_width, kappa_stream, load_table,
                       sample_invariant)
from .corridors import (Corridor, JointTailProbe, TailEstimate,
                        enumerate_corridors, joint_tail_estimate,
                        nondegeneracy_check, tail_fit)
from .normalizers import (AFunction, CnlgEll1, ConstEll1, NormalizerConfig,
                          NormalizerSequence, PowerLLEll1, a_seq,
                          appendix_integral, c_star, hl0_verify, iterated_log,
                          normalizer_sequence, series_diagnostic, tilde_ell)
from .oracle import (ParetoSymConfig, oracle_truncated_moments,
                     sample_gaussian_control, sample_pareto_sym)
from .sources import SourceSpec, open_stream
from .truncation import (BlockLayout, band, band_second_moment,
                         block_decomposition, first_passage_profile,
                         fourth_moment_ratio, truncate, truncated_cov,
                         underline)
from .limits import (CLTReport, LILReport, MixingProbe, a_record_check,
                     clt_experiment, exceedance_profile, ks_distance,
                     lil_record, mixing_decay)

__all__ = [name for name in dir() if not name.startswith("_")]
