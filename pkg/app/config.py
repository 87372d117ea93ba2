# -*- coding: utf-8 -*-
"""
配置管理模块

进程级设置 (worker 数量、日志级别等) 通过环境变量 / .env 注入,
实验本身的参数在 TOML 配置文件中 (见 app/models.py)。
"""
import os
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """应用配置"""

    model_config = SettingsConfigDict(
        env_prefix="LEVYLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    app_name: str = "Lévy metastability lab"
    app_version: str = "1.0.0"

    # 并行 worker 数量, 默认使用全部核心
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    log_level: str = "INFO"

    # 每次补充噪声缓冲区时抽取的标准正态数个数
    noise_block: int = Field(default=4096, ge=16)

    # 默认输出根目录 (--out 未指定时使用)
    output_root: str = "output"


@lru_cache()
def get_settings() -> Settings:
    """获取配置单例"""
    return Settings()
