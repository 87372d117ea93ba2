# -*- coding: utf-8 -*-
"""
Config Ingestion Layer - 实验配置的加载抽象

BaseConfigLoader 定义统一接口; 今天是 TOML 文件, 测试里直接传 dict,
runner 只依赖抽象接口。
"""
import copy
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.models import ExperimentConfig, validate

logger = logging.getLogger(__name__)


class BaseConfigLoader(ABC):
    """
    配置加载器抽象基类

    子类只负责产出原始 dict, 结构校验与约束检查在 load() 中统一完成
    """

    @abstractmethod
    def raw(self) -> Dict[str, Any]:
        """
        读取原始配置

        Returns:
            Dict: 与 ExperimentConfig 结构一致的嵌套字典
        """
        pass

    @property
    def source(self) -> str:
        return self.__class__.__name__

    def load(self, overrides: Optional[Dict[str, Any]] = None, check: bool = True) -> ExperimentConfig:
        """
        解析 + 校验

        Args:
            overrides: 命令行覆盖, 形如 {"run.seed": 7, "run.n_paths": 100}
            check: 是否执行 validate() 约束检查

        Raises:
            ConfigError: 结构不合法或约束被违反 (data['violations'] 列出约束名)
        """
        data = self.raw()
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            node = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                node = node.setdefault(key, {})
            node[leaf] = value
        try:
            config = ExperimentConfig.model_validate(data)
        except ValidationError as e:
            violations = [
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            ]
            raise ConfigError(f"invalid configuration in {self.source}",
                              data={"violations": violations}) from e
        if check:
            violations = validate(config)
            if violations:
                raise ConfigError(f"constraint violations in {self.source}: {', '.join(violations)}",
                                  data={"violations": violations})
        logger.info(f"loaded {config.experiment.kind} config from {self.source}")
        return config


class TomlConfigLoader(BaseConfigLoader):
    """TOML 文件加载器 (语法见 docs/CONFIG_FORMAT.md)"""

    def __init__(self, file_path: str):
        self.file_path = Path(file_path)
        if not self.file_path.exists():
            raise ConfigError(f"config file not found: {file_path}")

    @property
    def source(self) -> str:
        return str(self.file_path)

    def raw(self) -> Dict[str, Any]:
        try:
            with open(self.file_path, "rb") as f:
                return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {self.file_path}: {e}") from e


class DictConfigLoader(BaseConfigLoader):
    """内存中的配置 (测试与脚本使用)"""

    def __init__(self, data: Dict[str, Any]):
        self.data = data

    def raw(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)


def violations_of(loader: BaseConfigLoader) -> List[str]:
    """结构错误与约束违反合并成一个列表 (validate 子命令使用)"""
    try:
        config = loader.load(check=False)
    except ConfigError as e:
        return list(e.data.get("violations", [e.message]))
    return validate(config)
