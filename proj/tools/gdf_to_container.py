#!/usr/bin/env python3
"""Convert BCI Competition IV 2a GDF files into raw eegkd containers.

Uses MNE for the GDF parsing (pip install mne). The emitted container is the
`raw` kind; feed it to `eegkd prepare --set prepare.format=raw ...` for
resampling, band-pass filtering and epoching.

Session 2 ("E") files carry the unknown-cue code 783 for every trial; pass
the matching true-labels .mat file (from the competition site) with --labels
to rewrite them to 769..772.

Example:
    python3 tools/gdf_to_container.py A01T.gdf out/S01_T_raw.eegc
    python3 tools/gdf_to_container.py A01E.gdf out/S01_E_raw.eegc --labels A01E.mat
"""

import argparse
import pathlib
import struct
import sys

EEG_CHANNELS = [
    "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2",
    "C4", "C6", "CP3", "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz",
]
CUE_CODES = (769, 770, 771, 772)
UNKNOWN_CUE = 783


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("gdf", help="input GDF file (A0xT.gdf / A0xE.gdf)")
    parser.add_argument("output", help="output container header path (*.eegc)")
    parser.add_argument("--labels", help=".mat file with true labels for E sessions")
    parser.add_argument("--subject", default=None, help="subject id (default: from filename)")
    parser.add_argument("--session", default=None, help="session id (default: from filename)")
    args = parser.parse_args()

    try:
        import mne
    except ImportError:
        print("this converter needs mne: pip install mne", file=sys.stderr)
        return 1
    import numpy as np

    raw = mne.io.read_raw_gdf(args.gdf, preload=True, verbose="error")
    picks = [ch for ch in raw.ch_names if not ch.lower().startswith("eog")]
    raw.pick(picks)
    if len(raw.ch_names) != len(EEG_CHANNELS):
        print(f"expected {len(EEG_CHANNELS)} EEG channels, found {len(raw.ch_names)}",
              file=sys.stderr)
        return 1

    signal = raw.get_data() * 1e6  # volts -> microvolts
    fs = float(raw.info["sfreq"])

    events, event_id = mne.events_from_annotations(raw, verbose="error")
    code_by_id = {}
    for name, ident in event_id.items():
        try:
            code_by_id[ident] = int(name)
        except ValueError:
            continue
    # keep cue events only; other markers can share onsets and are not epoched
    onsets, codes = [], []
    for onset, _, ident in events:
        code = code_by_id.get(ident)
        if code is None or code not in (UNKNOWN_CUE, *CUE_CODES):
            continue
        onsets.append(int(onset))
        codes.append(code)

    if args.labels:
        from scipy.io import loadmat

        true_labels = loadmat(args.labels)["classlabel"].ravel()
        if len(codes) != len(true_labels):
            print(f"label count {len(true_labels)} does not match {len(codes)} cues",
                  file=sys.stderr)
            return 1
        codes = [CUE_CODES[int(label) - 1] for label in true_labels]

    stem = pathlib.Path(args.gdf).stem  # e.g. A01T
    subject = args.subject or ("S" + stem[1:3])
    session = args.session or stem[3:]

    out = pathlib.Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = [
        "format_version=1",
        "kind=raw",
        f"subject_id={subject}",
        f"session_id={session}",
        f"fs={fs:.17g}",
        "channel_names=" + ",".join(EEG_CHANNELS),
        f"n_samples={signal.shape[1]}",
        "events=" + ",".join(f"{o}:{c}" for o, c in zip(onsets, codes)),
    ]
    out.write_text("\n".join(header) + "\n")
    payload = signal.astype("<f4").tobytes()
    (out.parent / (out.name + ".dat")).write_bytes(payload)
    print(f"wrote {out} ({signal.shape[0]} channels, {signal.shape[1]} samples @ {fs:g} Hz, "
          f"{len(onsets)} events)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
