"""
扁平 `key = value` 配置文件的解析与输出
"""

from pathlib import Path
from typing import Dict, Iterable, Mapping


class ConfigError(ValueError):
    """配置文件格式错误, 未知键或非法取值"""


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    解析配置文本

    :param text: UTF-8 文本, 每行 `key = value`, `#` 之后为注释
    :param source: 报错时使用的来源名称
    :return: 键 -> 原始字符串值
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def read_config_file(path) -> Dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config_text(text, str(path))


def parse_overrides(items: Iterable[str]) -> Dict[str, str]:
    """解析命令行 `--set key=value`"""
    values: Dict[str, str] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        if not key:
            raise ConfigError(f"--set has an empty key: {item!r}")
        values[key] = value
    return values


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def format_config(values: Mapping[str, object]) -> str:
    """按键排序输出, 可被 parse_config_text 读回"""
    lines = [f"{key} = {_format_value(values[key])}" for key in sorted(values)]
    return "\n".join(lines) + "\n"

