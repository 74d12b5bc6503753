import numpy as np
import pytest

from ndprop.program import parse_program

APPENDIX_A = "a :- not b.\nb :- not a.\n"


@pytest.fixture
def choice_program():
    return parse_program(APPENDIX_A)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
