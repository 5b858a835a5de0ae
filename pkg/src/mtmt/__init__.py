"""Non-neural toolkit for Meta-Cat multi-talker ASR pipelines.

Speaker supervision from RTTM timestamps, Meta-Cat speaker encodings of
encoder embeddings, speaker-token transcript formats, and WER / cpWER /
TS-WER scoring.
"""

__version__ = "0.1.0"
