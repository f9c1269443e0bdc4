"""Cooperative quizbowl: a retrieval guesser that explains itself, a buzzing
game engine, balanced condition assignment, and the analysis pipeline that
measures how much each interpretation helps players."""

__version__ = "0.1.0"
