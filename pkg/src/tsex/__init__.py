"""Target-speaker extraction toolkit.

Simulate two-speaker mixtures, train a speaker-conditioned mask-estimation
network with magnitude/temporal spectrum-approximation losses, and score
extractions with SI-SDR.
"""

from .audio_io import Waveform, read_wav, write_wav
from .estimator import TargetSpeakerExtractor, extract_waveform
from .evalkit import EvalReport, evaluate, si_sdr
from .losses import LossWeights, mal, msal, mtsal, mtsal_grad
from .masks import Mask, apply_mask, ibm, oracle_psm_mask, psm_target
from .mixsim import CorpusIndex, MixtureRecord, index_corpus, mix_pair, simulate_set
from .net import NetConfig, build_model, count_parameters, load_checkpoint, save_checkpoint
from .stft import Spectrogram, StftConfig, istft, magnitude, make_window, phase, stft
from .temporal import accel, delta, delta_adjoint
from .trainer import TrainConfig, adam_step, train

__version__ = "0.1.0"
