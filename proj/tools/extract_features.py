#!/usr/bin/env python3
"""Writes pretrained speech features for the precomputed encoder backend.

For every .wav under --audio the script runs a HuggingFace speech model and
stores the last hidden state as <out>/<stem>.feat in the motion container
format (kind 2, fps = feature rate). Point encoder.weights_path at <out>.

Requires torch, torchaudio and transformers; none are needed by the C++ build.
"""

import argparse
import pathlib
import struct
import sys

MODELS = {
    "reference-pretrained": "facebook/hubert-base-ls960",
    "alternate-pretrained": "facebook/wav2vec2-base-960h",
}
SAMPLE_RATE = 16000
FEATURE_RATE = 50.0


def write_container(path, frames, fps, sentence):
    n, d = frames.shape
    sentence_bytes = sentence.encode("utf-8")
    with open(path, "wb") as out:
        out.write(b"DFMO")
        out.write(struct.pack("<IB3xIId", 1, 2, n, d, fps))
        out.write(struct.pack("<I", 0))
        out.write(struct.pack("<I", len(sentence_bytes)))
        out.write(sentence_bytes)
        out.write(frames.astype("<f4").tobytes(order="C"))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--audio", required=True, type=pathlib.Path, help="directory of .wav files")
    parser.add_argument("--out", required=True, type=pathlib.Path)
    parser.add_argument("--encoder", choices=sorted(MODELS), default="reference-pretrained")
    parser.add_argument("--model", help="override the HuggingFace model id")
    args = parser.parse_args()

    try:
        import torch
        import torchaudio
        from transformers import AutoModel
    except ImportError as err:
        sys.exit(f"missing dependency: {err}; install torch, torchaudio and transformers")

    model = AutoModel.from_pretrained(args.model or MODELS[args.encoder]).eval()
    args.out.mkdir(parents=True, exist_ok=True)
    wavs = sorted(args.audio.rglob("*.wav"))
    if not wavs:
        sys.exit(f"no .wav files under {args.audio}")
    for wav in wavs:
        signal, rate = torchaudio.load(str(wav))
        signal = signal.mean(dim=0, keepdim=True)
        if rate != SAMPLE_RATE:
            signal = torchaudio.functional.resample(signal, rate, SAMPLE_RATE)
        with torch.no_grad():
            hidden = model(signal).last_hidden_state[0].cpu().numpy().astype("float64")
        write_container(args.out / f"{wav.stem}.feat", hidden, FEATURE_RATE, wav.stem)
        print(f"{wav.stem}: {hidden.shape[0]} x {hidden.shape[1]}")


if __name__ == "__main__":
    main()
