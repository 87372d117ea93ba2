# -*- coding: utf-8 -*-
"""
统一测试结果封装工具

报告中每个统计检验都用同一个结构: {test, statistic, p_value, n, pass}
"""
import math
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field


class CheckEntry(BaseModel):
    """统一检验结果格式"""
    model_config = ConfigDict(populate_by_name=True)

    test: str
    statistic: Optional[float] = None
    p_value: Optional[float] = None
    n: int = 0
    passed: bool = Field(alias="pass")
    details: Dict[str, Any] = Field(default_factory=dict)


def _finite(value: Optional[float]) -> Optional[float]:
    """JSON 不支持 inf / nan, 统一写成 null"""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def check_entry(test: str, passed: bool, statistic: Optional[float] = None,
               p_value: Optional[float] = None, n: int = 0, **details) -> dict:
    """
    检验结果

    Args:
        test: 检验名称
        passed: 是否通过
        statistic: 检验统计量
        p_value: p 值
        n: 样本量
        details: 其他需要写进报告的字段

    Returns:
        dict: 标准检验结果格式
    """
    entry = CheckEntry(test=test, statistic=_finite(statistic), p_value=_finite(p_value),
                      n=int(n), passed=bool(passed), details=details)
    return entry.model_dump(by_alias=True)


def error_entry(error: Exception, code: int = 1) -> dict:
    """
    错误结果

    Args:
        error: 捕获到的异常 (LevyLabError 带 message / data)
        code: 进程退出码

    Returns:
        dict: 标准错误格式
    """
    return {
        "code": code,
        "error": type(error).__name__,
        "message": getattr(error, "message", str(error)),
        "data": getattr(error, "data", {}),
    }
