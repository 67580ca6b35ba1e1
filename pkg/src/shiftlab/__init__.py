"""Finite-scale computation in symbolic dynamics and thermodynamic formalism.

Build concrete shift spaces, check gluing/decomposition conditions at
certified depths, construct synchronising triples, free families, and the
countable-state tower, and produce pressure, Gibbs, and recurrence
diagnostics.
"""

__version__ = "0.1.0"

from .core import (
    Alphabet,
    EMPTY_WORD,
    LanguageOracle,
    Potential,
    Word,
    WordSet,
    distortion_bound,
    enumerate_language,
    phi_hat,
    set_thread_count,
    subword,
)
from .models import (
    BetaSpec,
    BlockCode,
    CocyclicSpec,
    CodedSpec,
    SGapSpec,
    SftSpec,
    avoid_symbol_set,
    beta_shift,
    cocyclic_shift,
    coded_shift,
    cycle_sft,
    full_shift,
    quasi_greedy_expansion,
    s_gap_shift,
    sft_entropy_exact,
    sft_from_forbidden,
    sliding_block_factor,
)
from .thermo import (
    PressureReport,
    cylinder_count_table,
    hyperbolicity_diagnostic,
    log_partition_sum,
    partition_sum,
    periodic_orbit_measure,
    periodic_points,
    pressure_estimate,
    word_count,
)
from .decomp import (
    ObstructionPair,
    TripleCollections,
    cgc_construct,
    check_complete_list_Istar,
    check_persistence,
    check_spec_I,
    check_stay_good_III,
    check_strong_spec_Iprime,
    good_words_from_obstructions,
    obstruction_complement,
    pressure_gap_II,
    qft_constraints,
    sync_decomposition,
)
from .tower import (
    FreeFamily,
    SyncTriple,
    TowerGraph,
    build_free_family,
    build_tower_over,
    ensure_no_long_overlaps,
    find_sync_triple,
    free_family_from_irreducibles,
    generator_obstruction_set,
    is_uniquely_decipherable,
    loop_sums,
    marking_analysis,
    spr_diagnostic,
    sync_times,
)
