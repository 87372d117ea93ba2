# -*- coding: utf-8 -*-
"""
Error hierarchy for the laboratory.

每个异常都带 message 和 data 两个属性, runner 统一捕获后写入报告。
"""
from typing import Any, Dict, Optional


class LevyLabError(Exception):
    """所有领域异常的基类"""

    def __init__(self, message: str, data: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.data = data or {}


class ConfigError(LevyLabError):
    """配置不合法 (data['violations'] 列出违反的约束)"""


class PreconditionError(LevyLabError):
    pass


class DomainError(LevyLabError):
    """参数超出函数定义域, e.g. tail evaluated below u=1"""


class StateOverflow(LevyLabError):
    """|x| exceeded the configured overflow bound"""


class HorizonExceeded(LevyLabError):
    pass


# ---- potential ----

class PotentialError(LevyLabError):
    pass


class DegenerateExtremum(PotentialError):
    pass


class NoMinimum(PotentialError):
    pass


class NonInterlaced(PotentialError):
    pass


# ---- statistics ----

class StatisticsError(LevyLabError):
    pass


class TooFewSamples(StatisticsError):
    pass


class ExcessCensoring(StatisticsError):
    pass


class UnclassifiedExcess(StatisticsError):
    pass


# ---- gaussian comparison ----

class ComparisonError(LevyLabError):
    pass


class NotTwoWell(ComparisonError):
    pass


class EqualDepth(ComparisonError):
    pass
