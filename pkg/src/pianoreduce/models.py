"""Generative piano-score models and the edit model.

All pitch distributions are over the 88-key range and normalized per
context. Log-space variants used by the decoders are cached per parameter
object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .score import N_PITCHES, PITCH_MAX, PITCH_MIN, key_position

__all__ = [
    "ModelError", "GaussianParams", "FingeringParams", "EditParams",
    "DistanceParams", "HandWeights", "UNIFORM_PITCH_LOGP",
    "no_info_logprob", "gaussian_initial", "gaussian_transition",
    "fingering_output", "train_fingering", "read_fingering_corpus",
    "default_fingering_params", "save_fingering_params", "load_fingering_params",
    "octave_shift_prob", "octave_shift_row", "closest_melodic_bass",
    "distance_pitch_prob", "importance_weights",
]

UNIFORM_PITCH_LOGP = -math.log(N_PITCHES)

_PITCHES = np.arange(PITCH_MIN, PITCH_MAX + 1)

N_FINGERS = 5
DX_BINS = 61   # displacement -15..+15 white-key units in half-key steps
DY_BINS = 3    # key-row change -1, 0, +1
DISPLACEMENT_FLOOR = 1e-6


class ModelError(ValueError):
    """Invalid model parameters or inputs."""


def no_info_logprob(count):
    """Log-probability of ``count`` notes under the no-information model
    (every note uniform over the 88 keys)."""
    if count < 0:
        raise ModelError("note count must be >= 0")
    return -count * math.log(N_PITCHES)


# ---------------------------------------------------------------------------
# Gaussian pitch model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianParams:
    """Gaussian pitch random-walk model.

    Transition and initial distributions are a Gaussian over pitch plus a
    constant smoothing term, renormalized over the 88 keys. The initial
    distribution of each hand is centered on that hand's anchor pitch.
    """

    sigma: float = 5.0
    smoothing: float = 4e-4
    init_pitch_left: int = 48    # C3
    init_pitch_right: int = 72   # C5

    def __post_init__(self):
        if self.sigma <= 0:
            raise ModelError("sigma must be positive")
        if self.smoothing < 0:
            raise ModelError("smoothing must be >= 0")
        for p in (self.init_pitch_left, self.init_pitch_right):
            if not PITCH_MIN <= p <= PITCH_MAX:
                raise ModelError(f"anchor pitch {p} outside key range")


def _gauss_row(center, sigma, smoothing):
    d = _PITCHES - center
    w = np.exp(-0.5 * (d / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    w = w + smoothing
    return w / w.sum()


_gauss_cache = {}


def _gauss_tables(params):
    tables = _gauss_cache.get(params)
    if tables is None:
        trans = np.empty((N_PITCHES, N_PITCHES))
        for i, p in enumerate(_PITCHES):
            trans[i] = _gauss_row(p, params.sigma, params.smoothing)
        init_l = _gauss_row(params.init_pitch_left, params.sigma, params.smoothing)
        init_r = _gauss_row(params.init_pitch_right, params.sigma, params.smoothing)
        with np.errstate(divide="ignore"):
            tables = {
                "trans": trans, "log_trans": np.log(trans),
                "init": {"L": init_l, "R": init_r},
                "log_init": {"L": np.log(init_l), "R": np.log(init_r)},
            }
        for arr in (trans, init_l, init_r):
            arr.flags.writeable = False
        _gauss_cache[params] = tables
    return tables


def gaussian_transition(prev_pitch, params=None):
    """Distribution over the next pitch given the previous pitch.

    Returns an array of 88 probabilities indexed by pitch - 21.
    """
    params = params or GaussianParams()
    if not PITCH_MIN <= prev_pitch <= PITCH_MAX:
        raise ModelError(f"pitch {prev_pitch} outside key range")
    return _gauss_tables(params)["trans"][prev_pitch - PITCH_MIN]


def gaussian_initial(hand, params=None):
    """First-note pitch distribution of one hand ('L' or 'R')."""
    params = params or GaussianParams()
    if hand not in ("L", "R"):
        raise ModelError(f"bad hand {hand!r}")
    return _gauss_tables(params)["init"][hand]


# ---------------------------------------------------------------------------
# fingering model
# ---------------------------------------------------------------------------

# keyboard displacement lookup shared by training and decoding
_KEY_X = np.array([key_position(p)[0] for p in _PITCHES])
_KEY_Y = np.array([key_position(p)[1] for p in _PITCHES], dtype=int)
_DX2 = np.rint(2.0 * (_KEY_X[None, :] - _KEY_X[:, None])).astype(int)  # [from, to]
_DXI = _DX2 + (DX_BINS - 1) // 2      # bin 30 = zero displacement
_DX_VALID = (_DXI >= 0) & (_DXI < DX_BINS)
_DYI = (_KEY_Y[None, :] - _KEY_Y[:, None]) + 1


@dataclass(frozen=True, eq=False)
class FingeringParams:
    """Hidden-finger pitch model for one hand.

    ``initial_finger`` is the distribution of the first finger,
    ``finger_transitions[f_prev-1, f-1]`` the finger-pair transition
    probability, and ``displacement[dxi, dyi, f_prev-1, f-1]`` the
    probability of moving by the keyboard displacement encoded by
    (dxi, dyi): dx = (dxi - 30) / 2 white-key units, dy = dyi - 1.
    """

    hand: str
    initial_finger: np.ndarray
    finger_transitions: np.ndarray
    displacement: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.hand not in ("L", "R"):
            raise ModelError(f"bad hand {self.hand!r}")
        init = np.asarray(self.initial_finger, dtype=float)
        trans = np.asarray(self.finger_transitions, dtype=float)
        disp = np.asarray(self.displacement, dtype=float)
        if init.shape != (N_FINGERS,):
            raise ModelError("initial_finger must have 5 entries")
        if trans.shape != (N_FINGERS, N_FINGERS):
            raise ModelError("finger_transitions must be 5x5")
        if disp.shape != (DX_BINS, DY_BINS, N_FINGERS, N_FINGERS):
            raise ModelError(f"displacement must be {DX_BINS}x{DY_BINS}x5x5")
        if (init < 0).any() or (trans < 0).any() or (disp < 0).any():
            raise ModelError("probabilities must be >= 0")
        if abs(init.sum() - 1.0) > 1e-6 or np.abs(trans.sum(1) - 1.0).max() > 1e-6:
            raise ModelError("finger distributions must sum to 1")
        if np.abs(disp.sum((0, 1)) - 1.0).max() > 1e-6:
            raise ModelError("displacement planes must sum to 1")
        for name, arr in (("initial_finger", init), ("finger_transitions", trans),
                          ("displacement", disp)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def reflected(self):
        """The mirror-image parameters for the other hand (dx negated)."""
        other = "L" if self.hand == "R" else "R"
        return FingeringParams(other, self.initial_finger.copy(),
                               self.finger_transitions.copy(),
                               self.displacement[::-1].copy())

    # derived log tables, built on first use
    def _tables(self):
        if not self._cache:
            raw = self.displacement[_DXI.clip(0, DX_BINS - 1), _DYI]  # [from, to, f', f]
            raw = np.where(_DX_VALID[:, :, None, None], raw, DISPLACEMENT_FLOOR)
            raw = raw.transpose(0, 2, 3, 1)  # [p_prev, f_prev, f, p]
            norm = raw / raw.sum(axis=3, keepdims=True)
            with np.errstate(divide="ignore"):
                self._cache["log_move"] = np.log(norm)
                self._cache["log_init"] = np.log(self.initial_finger)
                self._cache["log_trans"] = np.log(self.finger_transitions)
        return self._cache


def fingering_output(prev_pitch, prev_finger, finger, params):
    """Next-pitch distribution for a finger pair, given the previous pitch.

    The displacement table is evaluated at the keyboard offset from
    ``prev_pitch`` to every key (out-of-range offsets score at the smoothing
    floor) and renormalized over the 88 keys.
    """
    for f in (prev_finger, finger):
        if not 1 <= f <= N_FINGERS:
            raise ModelError(f"finger {f} outside 1..5")
    if not PITCH_MIN <= prev_pitch <= PITCH_MAX:
        raise ModelError(f"pitch {prev_pitch} outside key range")
    row = params._tables()["log_move"][prev_pitch - PITCH_MIN, prev_finger - 1, finger - 1]
    return np.exp(row)


def read_fingering_corpus(path):
    """Read a fingering corpus: one sequence per line of ``pitch:finger``
    tokens, '#' comments allowed."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            pitches, fingers = [], []
            for tok in body.split():
                try:
                    p, f = tok.split(":")
                    pitches.append(int(p))
                    fingers.append(int(f))
                except ValueError:
                    raise ModelError(f"{path}:{lineno}: bad token {tok!r}") from None
            out.append((tuple(pitches), tuple(fingers)))
    return out


def train_fingering(corpus, alpha=0.1, hand="R"):
    """Maximum-likelihood fingering parameters with additive smoothing.

    Parameters
    ----------
    corpus : sequences of (pitches, fingers), equal-length pairs
    alpha : additive smoothing added to every count cell
    hand : which hand the corpus fingerings describe

    The displacement counts are symmetrized by averaging each cell with its
    time-inverted partner (dx, dy, fingers all reversed) before
    normalization, so the trained table satisfies the time-inversion
    identity exactly. Transitions whose keyboard offset falls outside the
    +-15 key-unit domain are dropped.
    """
    corpus = list(corpus)
    if not corpus:
        raise ModelError("empty fingering corpus")
    if alpha < 0:
        raise ModelError("alpha must be >= 0")
    init_c = np.zeros(N_FINGERS)
    trans_c = np.zeros((N_FINGERS, N_FINGERS))
    disp_c = np.zeros((DX_BINS, DY_BINS, N_FINGERS, N_FINGERS))
    for seq_no, (pitches, fingers) in enumerate(corpus):
        if len(pitches) != len(fingers) or not pitches:
            raise ModelError(f"sequence {seq_no}: pitches and fingers must align")
        for p in pitches:
            if not PITCH_MIN <= p <= PITCH_MAX:
                raise ModelError(f"sequence {seq_no}: pitch {p} outside key range")
        for f in fingers:
            if not 1 <= f <= N_FINGERS:
                raise ModelError(f"sequence {seq_no}: finger {f} outside 1..5")
        init_c[fingers[0] - 1] += 1
        for (p0, f0), (p1, f1) in zip(zip(pitches, fingers), zip(pitches[1:], fingers[1:])):
            trans_c[f0 - 1, f1 - 1] += 1
            dxi = _DXI[p0 - PITCH_MIN, p1 - PITCH_MIN]
            if 0 <= dxi < DX_BINS:
                disp_c[dxi, _DYI[p0 - PITCH_MIN, p1 - PITCH_MIN], f0 - 1, f1 - 1] += 1

    def norm_rows(counts):
        counts = counts + alpha
        totals = counts.sum(axis=-1, keepdims=True)
        uniform = np.full_like(counts, 1.0 / counts.shape[-1])
        with np.errstate(invalid="ignore"):
            rows = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), uniform)
        return rows

    init = norm_rows(init_c)
    trans = norm_rows(trans_c)

    # average with the time-inverted partner; float addition commutes, so the
    # averaged counts are symmetric at the bit level
    inv = disp_c[::-1, ::-1].transpose(0, 1, 3, 2)
    sym = 0.5 * (disp_c + inv)
    sym = sym + alpha
    np.maximum(sym, DISPLACEMENT_FLOOR, out=sym)
    totals = sym.sum(axis=(0, 1))
    # share one normalizer per unordered finger pair so both orders divide by
    # the identical float
    for i in range(N_FINGERS):
        for j in range(i + 1, N_FINGERS):
            totals[j, i] = totals[i, j]
    disp = sym / totals[None, None]
    return FingeringParams(hand, init, trans, disp)


_default_fingering = {}


def default_fingering_params(hand="R"):
    """Fingering parameters trained on the packaged toy corpus (cached)."""
    if hand not in ("L", "R"):
        raise ModelError(f"bad hand {hand!r}")
    if not _default_fingering:
        ref = resources.files(__package__).joinpath("data/toy_fingering_corpus.txt")
        with resources.as_file(ref) as path:
            corpus = read_fingering_corpus(path)
        right = train_fingering(corpus, alpha=0.1, hand="R")
        _default_fingering["R"] = right
        _default_fingering["L"] = right.reflected()
    return _default_fingering[hand]


def save_fingering_params(params, path):
    """Write fingering parameters to a self-describing text file.

    Floats are written with repr so that load/save round-trips are
    bit-identical.
    """
    def line(values):
        return " ".join(repr(float(v)) for v in values) + "\n"

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("fingering-params v1\n")
        fh.write(f"hand {params.hand}\n")
        fh.write("initial_finger 5\n")
        fh.write(line(params.initial_finger))
        fh.write("finger_transitions 5 5\n")
        for row in params.finger_transitions:
            fh.write(line(row))
        fh.write(f"displacement {DX_BINS} {DY_BINS} {N_FINGERS} {N_FINGERS}\n")
        # one dx row per line, nested loops over (dy, f_prev, f)
        for dyi in range(DY_BINS):
            for fp in range(N_FINGERS):
                for f in range(N_FINGERS):
                    fh.write(line(params.displacement[:, dyi, fp, f]))


def load_fingering_params(path):
    """Read parameters written by save_fingering_params."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    try:
        if lines[0] != "fingering-params v1":
            raise ModelError(f"{path}: not a fingering parameter file")
        hand = lines[1].split()[1]
        if lines[2] != "initial_finger 5":
            raise ModelError(f"{path}: bad initial_finger header")
        init = [float(v) for v in lines[3].split()]
        if lines[4] != "finger_transitions 5 5":
            raise ModelError(f"{path}: bad finger_transitions header")
        trans = [[float(v) for v in lines[5 + r].split()] for r in range(N_FINGERS)]
        if lines[10] != f"displacement {DX_BINS} {DY_BINS} {N_FINGERS} {N_FINGERS}":
            raise ModelError(f"{path}: bad displacement header")
        disp = np.empty((DX_BINS, DY_BINS, N_FINGERS, N_FINGERS))
        row = 11
        for dyi in range(DY_BINS):
            for fp in range(N_FINGERS):
                for f in range(N_FINGERS):
                    vals = [float(v) for v in lines[row].split()]
                    if len(vals) != DX_BINS:
                        raise ModelError(f"{path}: displacement row {row} has {len(vals)} values")
                    disp[:, dyi, fp, f] = vals
                    row += 1
    except (IndexError, ValueError) as exc:
        raise ModelError(f"{path}: truncated or malformed parameter file ({exc})") from None
    return FingeringParams(hand, np.array(init), np.array(trans), disp)


# ---------------------------------------------------------------------------
# edit model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EditParams:
    """Edit-model constants.

    ``octave_prob`` is the probability of writing a kept note an octave away
    from its source; ``importance_gain`` scales how strongly melody/bass
    membership and multiplicity suppress deletion; ``mult_weight`` converts
    multiplicity into importance.
    """

    octave_prob: float = 0.001
    importance_gain: float = 11.0
    mult_weight: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.octave_prob < 0.5:
            raise ModelError("octave_prob must be in [0, 0.5)")
        if self.importance_gain < 0 or self.mult_weight < 0:
            raise ModelError("importance_gain and mult_weight must be >= 0")


def octave_shift_row(latent_pitch, params=None):
    """Distribution of the source pitch explained by a kept latent pitch.

    Mass 1 - 2*octave_prob on the latent pitch itself and octave_prob on
    each octave neighbour; a neighbour outside the key range folds its mass
    back onto the latent pitch. Indexed by pitch - 21, sums to 1.
    """
    params = params or EditParams()
    if not PITCH_MIN <= latent_pitch <= PITCH_MAX:
        raise ModelError(f"pitch {latent_pitch} outside key range")
    g = params.octave_prob
    row = np.zeros(N_PITCHES)
    row[latent_pitch - PITCH_MIN] = 1.0 - 2.0 * g
    for shifted in (latent_pitch - 12, latent_pitch + 12):
        if PITCH_MIN <= shifted <= PITCH_MAX:
            row[shifted - PITCH_MIN] += g
        else:
            row[latent_pitch - PITCH_MIN] += g
    return row


def octave_shift_prob(latent_pitch, source_pitch, params=None):
    """Single entry of octave_shift_row."""
    if not PITCH_MIN <= source_pitch <= PITCH_MAX:
        raise ModelError(f"pitch {source_pitch} outside key range")
    return octave_shift_row(latent_pitch, params)[source_pitch - PITCH_MIN]


def importance_weights(score, params=None):
    """Per-note importance of a condensed score: melody flag + bass flag +
    mult_weight * multiplicity."""
    params = params or EditParams()
    mel = np.array(score.melodic, dtype=float)
    bas = np.array(score.bass, dtype=float)
    mult = np.array(score.multiplicity, dtype=float)
    return mel + bas + params.mult_weight * mult


# ---------------------------------------------------------------------------
# distance-based baseline model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceParams:
    """Pitch-distance baseline: Gaussian around the nearest melody/bass note."""

    sigma: float = 5.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ModelError("sigma must be positive")


def closest_melodic_bass(index, score):
    """Index of the annotated (melodic or bass) note closest to note ``index``.

    Closest by onset distance, ties by pitch distance, then by lower pitch.
    """
    anchors = [i for i in range(len(score.notes)) if score.melodic[i] or score.bass[i]]
    if not anchors:
        raise ModelError("score has no melody/bass annotations")
    me = score.notes[index]
    return min(anchors, key=lambda i: (abs(score.notes[i].onset - me.onset),
                                       abs(score.notes[i].pitch - me.pitch),
                                       score.notes[i].pitch))


def distance_pitch_prob(index, score, params=None):
    """Pitch distribution of note ``index`` under the distance baseline:
    a Gaussian centered on the closest melody/bass note, normalized over
    the 88 keys."""
    params = params or DistanceParams()
    center = score.notes[closest_melodic_bass(index, score)].pitch
    d = _PITCHES - center
    w = np.exp(-0.5 * (d / params.sigma) ** 2)
    return w / w.sum()


# ---------------------------------------------------------------------------
# hand weights for the merged two-hand model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HandWeights:
    """Prior over which hand plays a note in the merged two-hand model."""

    left: float = 0.5
    right: float = 0.5

    def __post_init__(self):
        if self.left < 0 or self.right < 0:
            raise ModelError("hand weights must be >= 0")
        if abs(self.left + self.right - 1.0) > 1e-9:
            raise ModelError("hand weights must sum to 1")
