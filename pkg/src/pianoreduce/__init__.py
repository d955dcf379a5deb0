"""Difficulty-aware piano reduction of ensemble scores.

The package turns a multi-part score into a two-hand piano score whose
playing difficulty stays under explicit per-hand targets. The pipeline:

    ingest/condense -> hand separation or reduction decoding -> difficulty
    profiling -> constrained optimization -> export

Generative piano-score models (uniform, pitch-proximity Gaussian, hidden
fingering) supply both the decoders and the difficulty measure; an edit
model grafts octave shifts and note deletion onto them.
"""

from .score import (OCTAVE_X, PITCH_MAX, PITCH_MIN, CondensedScore,
                    NoteEvent, PianoScore, ScoreError, apply_overlay,
                    bar_boundaries, condense, infer_melody_bass, ingest,
                    key_distance, key_position, read_notes_text,
                    read_overlay, write_notes_text)
from .smf import MidiError, read_smf, write_smf
from .models import (DistanceParams, EditParams, FingeringParams,
                     GaussianParams, HandWeights, ModelError,
                     closest_melodic_bass, default_fingering_params,
                     distance_pitch_prob, fingering_output,
                     gaussian_initial, gaussian_transition,
                     importance_weights, load_fingering_params,
                     no_info_logprob, octave_shift_prob,
                     read_fingering_corpus, save_fingering_params,
                     train_fingering)
from .decoder import (DecodeError, DecodedPath, HandSub, MergedState,
                      SeparationResult, decode_fingering, decode_region,
                      decode_reduction, score_reduction_path,
                      separate_hands, viterbi)
from .difficulty import (DIFFICULTY_MODELS, DifficultyProfile,
                         PredictionMetrics, Thresholds, attribute_errors,
                         difficulty_at, difficulty_profile, error_counts,
                         error_prediction_metrics, predict_errors,
                         read_error_annotations, read_profile_csv,
                         sweep_thresholds, window_notes,
                         write_error_annotations, write_profile_csv)
from .reduction import (PRESETS, REDUCTION_MODELS, RHO_GRID, ControlState,
                        IterationRecord, ReductionResult, TargetDifficulty,
                        deletion_prob, deletion_probs, ensemble_difficulty,
                        export_reduction, iterative_reduce, one_time_control,
                        one_time_reduce, reduction_piano_score,
                        violation_regions)
from .report import (ReductionMetrics, ReportError, batch_report,
                     evaluate_reduction)
from .corpus import generate_corpus, generate_piece, inject_errors, prepared_corpus

__version__ = "0.1.0"

__all__ = [
    "OCTAVE_X", "PITCH_MAX", "PITCH_MIN", "CondensedScore", "NoteEvent",
    "PianoScore", "ScoreError", "apply_overlay", "bar_boundaries",
    "condense", "infer_melody_bass", "ingest", "key_distance",
    "key_position", "read_notes_text", "read_overlay", "write_notes_text",
    "MidiError", "read_smf", "write_smf",
    "DistanceParams", "EditParams", "FingeringParams", "GaussianParams",
    "HandWeights", "ModelError", "closest_melodic_bass",
    "default_fingering_params", "distance_pitch_prob", "fingering_output",
    "gaussian_initial", "gaussian_transition", "importance_weights",
    "load_fingering_params", "no_info_logprob", "octave_shift_prob",
    "read_fingering_corpus", "save_fingering_params", "train_fingering",
    "DecodeError", "DecodedPath", "HandSub", "MergedState",
    "SeparationResult", "decode_fingering", "decode_region",
    "decode_reduction", "score_reduction_path", "separate_hands", "viterbi",
    "DIFFICULTY_MODELS", "DifficultyProfile", "PredictionMetrics",
    "Thresholds", "attribute_errors", "difficulty_at", "difficulty_profile",
    "error_counts", "error_prediction_metrics", "predict_errors",
    "read_error_annotations", "read_profile_csv", "sweep_thresholds",
    "window_notes", "write_error_annotations", "write_profile_csv",
    "PRESETS", "REDUCTION_MODELS", "RHO_GRID", "ControlState",
    "IterationRecord", "ReductionResult", "TargetDifficulty",
    "deletion_prob", "deletion_probs", "ensemble_difficulty",
    "export_reduction", "iterative_reduce", "one_time_control",
    "one_time_reduce", "reduction_piano_score", "violation_regions",
    "ReductionMetrics", "ReportError", "batch_report", "evaluate_reduction",
    "generate_corpus", "generate_piece", "inject_errors", "prepared_corpus",
    "__version__",
]
