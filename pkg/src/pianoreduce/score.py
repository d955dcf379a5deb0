"""Score data model: note events, condensed scores, keyboard geometry,
melody/bass annotation, and the plain-text score format."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace

import numpy as np

PITCH_MIN = 21
PITCH_MAX = 108
N_PITCHES = PITCH_MAX - PITCH_MIN + 1  # 88 keys, A0..C8

# x offsets of the pitch classes inside one octave, in white-key units.
# White keys sit on the integer lattice, black keys at the midpoint of
# their white neighbours one unit above the white-key row.
_PC_X = {0: 0.0, 1: 0.5, 2: 1.0, 3: 1.5, 4: 2.0, 5: 3.0,
         6: 3.5, 7: 4.0, 8: 4.5, 9: 5.0, 10: 5.5, 11: 6.0}
_PC_BLACK = {1, 3, 6, 8, 10}
OCTAVE_X = 7.0  # one octave spans seven white keys


class ScoreError(ValueError):
    """Malformed note data or score file."""


@dataclass(frozen=True)
class NoteEvent:
    """One note: id, onset in seconds, MIDI pitch, source track, duration."""

    id: int
    onset: float
    pitch: int
    track: int = 0
    duration: float = 0.0

    def sort_key(self):
        return (self.onset, self.pitch, self.track, self.id)


@dataclass(frozen=True)
class PianoScore:
    """A piano score: notes plus a hand label ('L'/'R') per note, and
    optionally a finger (1..5) per note."""

    notes: tuple
    hands: tuple
    fingers: tuple | None = None

    def __post_init__(self):
        if len(self.hands) != len(self.notes):
            raise ScoreError("one hand label per note required")
        for h in self.hands:
            if h not in ("L", "R"):
                raise ScoreError(f"bad hand label {h!r}")
        if self.fingers is not None and len(self.fingers) != len(self.notes):
            raise ScoreError("one finger per note required")

    def __len__(self):
        return len(self.notes)

    def hand_part(self, hand):
        """(onsets, pitches, fingers|None) of one hand, in score order."""
        idx = [i for i, h in enumerate(self.hands) if h == hand]
        onsets = np.array([self.notes[i].onset for i in idx], dtype=float)
        pitches = np.array([self.notes[i].pitch for i in idx], dtype=int)
        fingers = None
        if self.fingers is not None:
            fingers = np.array([self.fingers[i] for i in idx], dtype=int)
        return onsets, pitches, fingers


@dataclass(frozen=True)
class CondensedScore:
    """Deduplicated ensemble score.

    Notes are unique on (pitch, onset); ``multiplicity[i]`` counts the
    duplicates that were merged into note i; ``melodic``/``bass`` flag the
    notes belonging to the annotated melody and bass lines.
    """

    notes: tuple
    multiplicity: tuple
    melodic: tuple
    bass: tuple

    def __post_init__(self):
        n = len(self.notes)
        if not (len(self.multiplicity) == len(self.melodic) == len(self.bass) == n):
            raise ScoreError("per-note columns must align")
        for i in range(n):
            if self.melodic[i] and self.bass[i]:
                raise ScoreError(f"note {self.notes[i].id} flagged both melodic and bass")

    def __len__(self):
        return len(self.notes)

    def onsets(self):
        return np.array([n.onset for n in self.notes], dtype=float)

    def pitches(self):
        return np.array([n.pitch for n in self.notes], dtype=int)

    def with_flags(self, melodic_ids=(), bass_ids=()):
        """Copy with melody/bass flags set for the given note ids."""
        mel_ids = set(melodic_ids)
        bas_ids = set(bass_ids)
        both = mel_ids & bas_ids
        if both:
            raise ScoreError(f"note {sorted(both)[0]} flagged both melodic and bass")
        mel = tuple(n.id in mel_ids for n in self.notes)
        bas = tuple(n.id in bas_ids for n in self.notes)
        return replace(self, melodic=mel, bass=bas)


def key_position(pitch):
    """Keyboard coordinates of a MIDI pitch.

    Returns (x, y) with white keys at y=0 on the integer x lattice and black
    keys at y=1 midway between their white neighbours. x is strictly
    increasing in pitch and shifts by exactly +7.0 per octave.
    """
    if not PITCH_MIN <= pitch <= PITCH_MAX:
        raise ScoreError(f"pitch {pitch} outside [{PITCH_MIN}, {PITCH_MAX}]")
    octave, pc = divmod(pitch - 12, 12)
    x = OCTAVE_X * octave + _PC_X[pc]
    y = 1.0 if pc in _PC_BLACK else 0.0
    return x, y


def key_distance(a, b):
    """Horizontal keyboard distance in white-key units between two pitches."""
    return key_position(b)[0] - key_position(a)[0]


def ingest(raw_notes):
    """Build a validated, sorted ensemble score from raw note tuples.

    Parameters
    ----------
    raw_notes : iterable of (onset, pitch, track[, duration])

    Returns
    -------
    tuple of NoteEvent, sorted by (onset, pitch, track) with ids 0..N-1.
    """
    cleaned = []
    for i, raw in enumerate(raw_notes):
        if len(raw) == 3:
            onset, pitch, track = raw
            duration = 0.0
        else:
            onset, pitch, track, duration = raw
        onset = float(onset)
        duration = float(duration)
        if not math.isfinite(onset) or onset < 0.0:
            raise ScoreError(f"note {i}: bad onset {onset!r}")
        if not math.isfinite(duration) or duration < 0.0:
            raise ScoreError(f"note {i}: bad duration {duration!r}")
        pitch = int(pitch)
        if not PITCH_MIN <= pitch <= PITCH_MAX:
            raise ScoreError(f"note {i}: pitch {pitch} outside [{PITCH_MIN}, {PITCH_MAX}]")
        cleaned.append((onset, pitch, int(track), duration))
    cleaned.sort(key=lambda r: (r[0], r[1], r[2]))
    return tuple(NoteEvent(i, o, p, t, d) for i, (o, p, t, d) in enumerate(cleaned))


def condense(notes):
    """Merge notes sharing (pitch, onset) into single notes with multiplicity.

    The kept representative is the duplicate with the smallest track id (then
    smallest id); multiplicity counts the removed duplicates. Note ids are
    preserved. Melody/bass flags start unset.
    """
    groups = {}
    for n in notes:
        groups.setdefault((n.onset, n.pitch), []).append(n)
    kept = []
    mult = []
    for key in sorted(groups):
        dup = groups[key]
        rep = min(dup, key=lambda n: (n.track, n.id))
        kept.append(rep)
        mult.append(len(dup) - 1)
    false = tuple(False for _ in kept)
    return CondensedScore(tuple(kept), tuple(mult), false, false)


def bar_boundaries(notes, bar_length, start=0.0):
    """Regular bar grid covering every onset in ``notes``."""
    if bar_length <= 0:
        raise ScoreError("bar length must be positive")
    last = max((n.onset for n in notes), default=start)
    n_bars = max(1, int(math.floor((last - start) / bar_length)) + 1)
    return tuple(start + k * bar_length for k in range(n_bars + 1))


def infer_melody_bass(score, boundaries):
    """Annotate melody and bass lines bar by bar from track registers.

    Within each bar, the track with the highest mean pitch is flagged melodic
    and the track with the lowest mean pitch is flagged bass (per-note
    unweighted means; ties go to the lower track id). If both picks land on
    the same track the bar gets only the melodic flag. Empty bars get none.

    Parameters
    ----------
    score : CondensedScore
    boundaries : ascending bar boundaries covering all onsets

    Returns
    -------
    CondensedScore with flags replaced.
    """
    bounds = list(boundaries)
    if sorted(bounds) != bounds:
        raise ScoreError("bar boundaries must be ascending")
    mel_ids, bas_ids = set(), set()
    for k in range(len(bounds) - 1):
        lo, hi = bounds[k], bounds[k + 1]
        last_bar = k == len(bounds) - 2
        in_bar = [n for n in score.notes
                  if lo <= n.onset < hi or (last_bar and n.onset == hi)]
        if not in_bar:
            continue
        by_track = {}
        for n in in_bar:
            by_track.setdefault(n.track, []).append(n)
        means = {t: sum(n.pitch for n in ns) / len(ns) for t, ns in by_track.items()}
        t_mel = max(means, key=lambda t: (means[t], -t))
        t_bas = min(means, key=lambda t: (means[t], t))
        mel_ids.update(n.id for n in by_track[t_mel])
        if t_bas != t_mel:
            bas_ids.update(n.id for n in by_track[t_bas])
    return score.with_flags(mel_ids, bas_ids)


# ---------------------------------------------------------------------------
# plain-text score format
#
# one note per line:  id onset_sec pitch track [M|B|-] [dur=SEC]
# '#' starts a comment, blank lines are skipped.
# ---------------------------------------------------------------------------

def read_notes_text(path):
    """Read a text score file.

    Returns (notes, melodic_ids, bass_ids) with notes sorted by
    (onset, pitch, track) and ids taken from the file.
    """
    notes = []
    mel, bas = set(), set()
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) < 4:
                raise ScoreError(f"{path}:{lineno}: expected 'id onset pitch track [M|B|-]'")
            try:
                nid = int(parts[0])
                onset = float(parts[1])
                pitch = int(parts[2])
                track = int(parts[3])
            except ValueError as exc:
                raise ScoreError(f"{path}:{lineno}: {exc}") from None
            duration = 0.0
            flag = "-"
            for tok in parts[4:]:
                if tok.startswith("dur="):
                    try:
                        duration = float(tok[4:])
                    except ValueError:
                        raise ScoreError(f"{path}:{lineno}: bad duration {tok!r}") from None
                elif tok in ("M", "B", "-"):
                    flag = tok
                else:
                    raise ScoreError(f"{path}:{lineno}: unexpected token {tok!r}")
            if nid in seen:
                raise ScoreError(f"{path}:{lineno}: duplicate note id {nid}")
            seen.add(nid)
            if not math.isfinite(onset) or onset < 0.0:
                raise ScoreError(f"{path}:{lineno}: bad onset {onset}")
            if not PITCH_MIN <= pitch <= PITCH_MAX:
                raise ScoreError(f"{path}:{lineno}: pitch {pitch} outside [{PITCH_MIN}, {PITCH_MAX}]")
            notes.append(NoteEvent(nid, onset, pitch, track, duration))
            if flag == "M":
                mel.add(nid)
            elif flag == "B":
                bas.add(nid)
    notes.sort(key=NoteEvent.sort_key)
    return tuple(notes), mel, bas


def write_notes_text(path, notes, melodic_ids=(), bass_ids=(), multiplicity=None):
    """Write notes in the plain-text score format (see read_notes_text)."""
    mel, bas = set(melodic_ids), set(bass_ids)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# id onset pitch track flag\n")
        for i, n in enumerate(notes):
            flag = "M" if n.id in mel else "B" if n.id in bas else "-"
            line = f"{n.id} {n.onset!r} {n.pitch} {n.track} {flag}"
            if n.duration:
                line += f" dur={n.duration!r}"
            if multiplicity is not None and multiplicity[i]:
                line += f"  # x{multiplicity[i] + 1}"
            fh.write(line + "\n")


def read_overlay(path):
    """Read melody/bass overlay lines of the form ``note_id M`` / ``note_id B``.

    Returns the list of (note_id, flag) pairs in file order; later lines
    override earlier ones when applied.
    """
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2 or parts[1] not in ("M", "B", "-"):
                raise ScoreError(f"{path}:{lineno}: expected 'note_id M|B|-'")
            try:
                nid = int(parts[0])
            except ValueError:
                raise ScoreError(f"{path}:{lineno}: bad note id {parts[0]!r}") from None
            out.append((nid, parts[1]))
    return out


def apply_overlay(score, overlay):
    """Apply overlay pairs to a CondensedScore; the last line per note wins."""
    ids = {n.id for n in score.notes}
    mel = {n.id for n, m in zip(score.notes, score.melodic) if m}
    bas = {n.id for n, b in zip(score.notes, score.bass) if b}
    for nid, flag in overlay:
        if nid not in ids:
            raise ScoreError(f"overlay refers to unknown note id {nid}")
        mel.discard(nid)
        bas.discard(nid)
        if flag == "M":
            mel.add(nid)
        elif flag == "B":
            bas.add(nid)
    return score.with_flags(mel, bas)
