"""Finitely supported signed measures, explicit JN-sequences and their transforms."""

from .errors import HorizonError, InvariantViolation, JNError, MeasureError, ParseError, PreconditionError
from .measure import (FinSuppMeasure, Point, SignedParts, dirac, integrate, linear_combine,
                      make_measure, normalize, pos_neg_split, restrict, signed_mass,
                      total_variation, zero)
from .spaces import CorpusConfig, Region, Space, TestFunction, corpus, get_space, min_combine, reparam, urysohn
from .generators import (MeasureSequence, Square4State, gen_convergent, gen_square, load_sequence,
                         save_sequence)

__all__ = [
    "CorpusConfig", "FinSuppMeasure", "HorizonError", "InvariantViolation", "JNError",
    "MeasureError", "MeasureSequence", "ParseError", "Point", "PreconditionError", "Region",
    "SignedParts", "Space", "Square4State", "TestFunction", "corpus", "dirac", "gen_convergent",
    "gen_square", "get_space", "integrate", "linear_combine", "load_sequence", "make_measure",
    "min_combine", "normalize", "pos_neg_split", "reparam", "restrict", "save_sequence",
    "signed_mass", "total_variation", "urysohn", "zero",
]
