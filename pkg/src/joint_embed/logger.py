"""日志模块

基于 dictConfig 的统一日志配置，所有模块日志挂在 ``joint_embed`` 命名空间下。
"""

import logging
from logging.config import dictConfig
from typing import Optional

ROOT_LOGGER = "joint_embed"

LEVEL_PREFIXES = {
    "DEBUG": "[DEBUG]",
    "INFO": "[INFO]",
    "WARNING": "[WARNING]",
    "ERROR": "[ERROR]",
    "CRITICAL": "[CRITICAL]",
}

DEFAULT_FORMAT = "%(levelprefix)s %(asctime)s | %(name)s | %(message)s"


class JointEmbedFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        fallback = f"[{record.levelname}]"
        record.levelprefix = LEVEL_PREFIXES.get(record.levelname, fallback)
        return super().format(record)


def create_logger(
    app_name: str = ROOT_LOGGER,
    log_level: str = "INFO",
    log_format: str = DEFAULT_FORMAT,
    log_file: Optional[str] = None,
) -> logging.Logger:
    """配置并返回应用根日志器

    Args:
        app_name: 日志器名称
        log_level: 日志级别
        log_format: 日志格式
        log_file: 可选的日志文件路径

    Returns:
        logging.Logger: 配置好的日志器
    """
    handlers = {
        "default": {
            "formatter": "default",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
        },
    }
    if log_file:
        handlers["file"] = {
            "formatter": "default",
            "class": "logging.FileHandler",
            "filename": log_file,
            "encoding": "utf-8",
        }

    logging_config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "()": JointEmbedFormatter,
                "fmt": log_format,
                "datefmt": "%Y-%m-%d %H:%M:%S",
            }
        },
        "handlers": handlers,
        "loggers": {
            app_name: {
                "handlers": list(handlers.keys()),
                "level": log_level,
                "propagate": False,
            },
        },
    }

    dictConfig(logging_config)
    return logging.getLogger(app_name)


def get_logger(name: str) -> logging.Logger:
    """获取模块日志器（挂在 joint_embed 命名空间下）"""
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
