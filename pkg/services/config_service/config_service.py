"""
运行配置服务
读取 YAML 运行文件，解析命令行参数并合并（命令行参数优先）
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import ValidationError

from services.data_service import parse_combine
from services.errors import ConfigError
from services.optimize_service import INIT_KEYS
from .config_models import RunConfig

logger = logging.getLogger(__name__)


def parse_init(value: Union[None, str, Dict[str, Any], Sequence[str]]) -> Dict[str, float]:
    """
    解析初值覆盖
    Args:
        value: "k=v,k=v" 字符串、字符串列表或字典
    Returns:
        Dict[str, float]: 参数名 -> 初值
    """
    if value is None:
        return {}
    if isinstance(value, dict):
        items = list(value.items())
    else:
        parts = [value] if isinstance(value, str) else list(value)
        items = []
        for part in parts:
            for chunk in str(part).split(","):
                if not chunk.strip():
                    continue
                if "=" not in chunk:
                    raise ConfigError(f"初值必须写成 k=v，实际为 '{chunk}'")
                key, raw = chunk.split("=", 1)
                items.append((key, raw))
    result = {}
    for key, raw in items:
        key = str(key).strip()
        if key not in INIT_KEYS:
            raise ConfigError(f"未知的初值参数 '{key}'，可选: {', '.join(INIT_KEYS)}")
        try:
            result[key] = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"初值 {key} 不是数值: '{raw}'")
    return result


def parse_pair(value: Union[None, str, Sequence[Any]], name: str, cast=str) -> Optional[Tuple[Any, Any]]:
    """解析 "x,y" 或长度为2的列表"""
    if value is None:
        return None
    parts = [p.strip() for p in value.split(",")] if isinstance(value, str) else list(value)
    if len(parts) != 2:
        raise ConfigError(f"{name} 需要两个值，用逗号分隔，实际为 '{value}'")
    try:
        return cast(parts[0]), cast(parts[1])
    except (TypeError, ValueError):
        raise ConfigError(f"{name} 的值无法解析: '{value}'")


class ConfigService:
    """运行配置服务类"""

    def load_yaml_config(self, path: Union[str, Path]) -> Dict[str, Any]:
        """
        加载 YAML 运行文件
        Args:
            path: 文件路径
        Returns:
            Dict[str, Any]: 配置项（键与命令行参数同名，连字符换成下划线）
        """
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"配置文件不存在: {file_path}")
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                content = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"配置文件 {file_path} 解析失败: {e}")
        if content is None:
            return {}
        if not isinstance(content, dict):
            raise ConfigError(f"配置文件 {file_path} 的顶层必须是映射")
        logger.debug(f"加载配置文件 {file_path}: {sorted(content)}")
        return {str(k).replace("-", "_"): v for k, v in content.items()}

    def normalize(self, values: Dict[str, Any]) -> Dict[str, Any]:
        """把字符串形式的复合参数解析成结构化的值"""
        values = dict(values)
        if "init" in values:
            values["init"] = parse_init(values["init"])
        if "combine" in values and values["combine"] is not None:
            combine = values["combine"]
            if isinstance(combine, dict):
                values["combine"] = {
                    k: (v.split(":") if isinstance(v, str) else list(v)) for k, v in combine.items()
                }
            else:
                values["combine"] = parse_combine([combine] if isinstance(combine, str) else combine)
        if "range" in values and values["range"] is not None:
            values["range"] = parse_pair(values["range"], "range", float)
        if "contrast" in values and values["contrast"] is not None:
            values["contrast"] = parse_pair(values["contrast"], "contrast", str)
        return values

    def build_run_config(self, command: str, flags: Dict[str, Any], config_file: Optional[str] = None) -> RunConfig:
        """
        合并 YAML 文件与命令行参数
        Args:
            command: 子命令
            flags: 命令行参数（未给出的为 None）
            config_file: YAML 文件路径
        Returns:
            RunConfig: 校验过的配置
        """
        values: Dict[str, Any] = {}
        if config_file:
            values.update(self.normalize(self.load_yaml_config(config_file)))
        given = {k: v for k, v in flags.items() if v is not None and v is not False and v != []}
        values.update(self.normalize(given))
        values["command"] = command
        try:
            return RunConfig(**values)
        except ValidationError as e:
            errors: List[str] = []
            for err in e.errors():
                loc = ".".join(str(p) for p in err["loc"]) or "config"
                errors.append(f"{loc}: {err['msg']}")
            raise ConfigError("配置无效: " + "; ".join(errors))


config_service = ConfigService()
