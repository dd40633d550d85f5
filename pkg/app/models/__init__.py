"""
Models module
In-memory records passed between services
"""
from .audio import AudioClip
from .spectrogram import ModelInput, Spectrogram
