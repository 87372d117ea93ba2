# -*- coding: utf-8 -*-
"""
共享 fixtures: 标准双井 / 三井势能与噪声模型
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from app.core.levy import InnerProfile, LevyModel, TailSpec
from app.core.potential import PolynomialPotential, analyze

CONFIG_DIR = PROJECT_ROOT / "configs"

DOUBLE_WELL = (0.0, 0.0, -0.5, 0.0, 0.25)
# U' = (x+2)(x+1)(x-1/2)(x-2)(x-3): 极小值 -2, 0.5, 3; 鞍点 -1, 2
THREE_WELL = tuple(P.polyint(P.polyfromroots([-2.0, -1.0, 0.5, 2.0, 3.0])))
TILTED_DOUBLE_WELL = (0.0, 0.1, -0.5, 0.0, 0.25)


@pytest.fixture(scope="session")
def double_well():
    return analyze(PolynomialPotential(DOUBLE_WELL))


@pytest.fixture(scope="session")
def three_well():
    return analyze(PolynomialPotential(THREE_WELL))


@pytest.fixture(scope="session")
def tilted_well():
    return analyze(PolynomialPotential(TILTED_DOUBLE_WELL))


@pytest.fixture(scope="session")
def cauchy_model():
    """对称 1-stable, 密度 |y|^-2"""
    return LevyModel.symmetric_stable(1.0)


@pytest.fixture(scope="session")
def asymmetric_model():
    """纯幂尾 r = 1.5, kappa = 1/2, 无内部质量"""
    return LevyModel(d=0.0, mu=0.0, tails=TailSpec(r=1.5, c_plus=1.0, c_minus=0.5),
                     inner=InnerProfile.truncated())


@pytest.fixture(scope="session")
def logpower_model():
    return LevyModel(d=0.0, mu=0.0, tails=TailSpec(r=1.5, c_plus=1.0, c_minus=1.0, sv_power=1.0),
                     inner=InnerProfile.truncated())


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
