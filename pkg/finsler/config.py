"""
Finsler 配置管理模块

统一管理求解器容差与日志设置，从 config.yaml 读取，
并允许通过 .env / 环境变量 FINSLER__SECTION__KEY 覆盖
"""

import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List

import yaml
from dotenv import load_dotenv

from .errors import ConfigValidationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "FINSLER__"


class Config:
    """配置管理类"""

    # 配置schema定义
    CONFIG_SCHEMA = {
        'norms': {
            'type': 'dict',
            'required': False,
            'properties': {
                'dual_seeds_per_dim': {
                    'type': 'int', 'min': 4, 'max': 4096, 'default': 64,
                    'description': '对偶范数每维初始方向数'
                },
                'dual_tolerance': {
                    'type': 'float', 'min': 0.0, 'max': 1e-3, 'default': 1e-12,
                    'description': '对偶范数细化容差'
                },
                'convexity_threshold': {
                    'type': 'float', 'min': 0.0, 'max': 1.0, 'default': 1e-8,
                    'description': 'Hessian 最小特征值阈值'
                },
                'convexity_samples_per_dim': {
                    'type': 'int', 'min': 1, 'max': 100000, 'default': 256,
                    'description': '强凸性检查每维采样数'
                },
                'theta_sweep': {
                    'type': 'int', 'min': 16, 'max': 10000000, 'default': 20000,
                    'description': 'θ 界的球面扫描点数'
                }
            }
        },
        'quadrature': {
            'type': 'dict',
            'required': False,
            'properties': {
                'rel_tol': {
                    'type': 'float', 'min': 0.0, 'max': 1e-2, 'default': 1e-12,
                    'description': '自适应积分相对容差'
                },
                'limit': {
                    'type': 'int', 'min': 50, 'max': 100000, 'default': 400,
                    'description': '自适应积分子区间上限'
                },
                'divergence_threshold': {
                    'type': 'float', 'min': 1.0, 'default': 1e6,
                    'description': 'Osgood 部分积分发散阈值'
                },
                'osgood_levels': {
                    'type': 'int', 'min': 10, 'max': 200, 'default': 40,
                    'description': 'Osgood 二分层数'
                }
            }
        },
        'ode1d': {
            'type': 'dict',
            'required': False,
            'properties': {
                'inversion_xtol': {
                    'type': 'float', 'min': 0.0, 'max': 1e-3, 'default': 1e-13,
                    'description': '隐式积分反演的对数尺度容差'
                },
                'memo_size': {
                    'type': 'int', 'min': 0, 'max': 10000000, 'default': 20000,
                    'description': '积分记忆化缓存容量'
                }
            }
        },
        'radial': {
            'type': 'dict',
            'required': False,
            'properties': {
                'grid_points': {
                    'type': 'int', 'min': 16, 'max': 1000000, 'default': 2000,
                    'description': '径向网格点数'
                },
                'clustering_exponent': {
                    'type': 'float', 'min': 1.0, 'max': 8.0, 'default': 3.0,
                    'description': '爆破端的网格聚集指数'
                },
                'newton_max_iterations': {
                    'type': 'int', 'min': 1, 'max': 10000, 'default': 200,
                    'description': 'Newton 最大迭代数'
                },
                'residual_tolerance': {
                    'type': 'float', 'min': 0.0, 'max': 1e-2, 'default': 1e-8,
                    'description': '相对离散残差上限'
                },
                'roundoff_ceiling': {
                    'type': 'float', 'min': 0.0, 'max': 1e-2, 'default': 1e-5,
                    'description': '线搜索停滞时可接受的舍入残差上限'
                },
                'max_doublings': {
                    'type': 'int', 'min': 1, 'max': 200, 'default': 40,
                    'description': 'k 加倍次数上限'
                },
                'stop_tolerance': {
                    'type': 'float', 'min': 0.0, 'default': 1e-6,
                    'description': '内部 sup 变化停止阈值'
                }
            }
        },
        'geometry': {
            'type': 'dict',
            'required': False,
            'properties': {
                'boundary_samples': {
                    'type': 'int', 'min': 64, 'max': 1000000, 'default': 4096,
                    'description': '边界采样点数'
                },
                'dual_table_size': {
                    'type': 'int', 'min': 64, 'max': 1000000, 'default': 4096,
                    'description': '二维对偶范数角度插值表大小'
                }
            }
        },
        'pde': {
            'type': 'dict',
            'required': False,
            'properties': {
                'eps_schedule': {
                    'type': 'list', 'default': [1e-2, 1e-4, 1e-6, 0.0],
                    'description': 'ε 连续化序列（相对梯度尺度）'
                },
                'max_iterations': {
                    'type': 'int', 'min': 1, 'max': 100000, 'default': 100,
                    'description': '每个 ε 阶段的 Newton 最大迭代数'
                },
                'residual_tolerance': {
                    'type': 'float', 'min': 0.0, 'max': 1e-2, 'default': 1e-8,
                    'description': '一阶最优性相对残差'
                },
                'stop_tolerance': {
                    'type': 'float', 'min': 0.0, 'default': 1e-5,
                    'description': 'k 序列内部稳定阈值'
                },
                'k_base': {
                    'type': 'float', 'min': 1.01, 'max': 100.0, 'default': 2.0,
                    'description': 'k 的几何增长因子'
                },
                'k_start': {
                    'type': 'float', 'min': 1e-6, 'default': 1.0,
                    'description': 'k 序列的首项'
                },
                'max_stages': {
                    'type': 'int', 'min': 1, 'max': 1000, 'default': 60,
                    'description': 'k 序列的最大长度'
                },
                'layer_width': {
                    'type': 'float', 'min': 1.0, 'max': 10.0, 'default': 3.0,
                    'description': '边界层厚度（以 h·θ₂ 为单位）'
                }
            }
        },
        'logging': {
            'type': 'dict',
            'required': False,
            'properties': {
                'level': {
                    'type': 'str',
                    'enum': ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                    'default': 'INFO',
                    'description': '日志级别'
                },
                'save_to_file': {
                    'type': 'bool', 'default': True,
                    'description': '是否保存到文件'
                },
                'log_dir': {
                    'type': 'str', 'default': 'logs', 'pattern': r'^[\w./-]+$',
                    'description': '日志目录'
                }
            }
        }
    }

    def __init__(self, config_file="config.yaml", use_env: bool = True):
        # 项目根目录（finsler 包的父目录）
        project_root = Path(__file__).parent.parent
        self.config_file = config_file
        self.config_path = project_root / config_file
        self.env_path = project_root / ".env"
        self.use_env = use_env
        self._config: Dict[str, Any] = {}
        self._validation_errors: List[str] = []
        self._validation_warnings: List[str] = []
        self._load_config()

    def _load_config(self):
        """载入配置文件"""
        try:
            if self.config_path.exists():
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    self._config = yaml.safe_load(f) or {}
                logger.debug(f"配置文件 {self.config_path} 载入成功")
            else:
                logger.info(f"配置文件 {self.config_path} 不存在，使用默认配置")
                self._config = self._get_default_config()
        except yaml.YAMLError as e:
            logger.warning(f"配置文件格式错误: {e}，使用默认配置")
            self._config = self._get_default_config()
        except OSError as e:
            logger.warning(f"读取配置文件时发生错误: {e}，使用默认配置")
            self._config = self._get_default_config()

        if self.use_env:
            self._apply_env_overrides()

        try:
            self._validate_config()
        except ConfigValidationError as e:
            logger.error(f"配置验证失败: {e}，使用默认配置")
            self._config = self._get_default_config()
            return

        for error in self._validation_errors:
            logger.warning(f"配置错误: {error}")

    def _apply_env_overrides(self):
        """从 .env 与环境变量读取 FINSLER__SECTION__KEY 覆盖"""
        if self.env_path.exists():
            load_dotenv(self.env_path, override=False)
        for name, raw in os.environ.items():
            if not name.startswith(ENV_PREFIX):
                continue
            key_path = name[len(ENV_PREFIX):].lower().replace('__', '.')
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError:
                value = raw
            self.set(key_path, value)
            logger.debug(f"环境变量覆盖配置: {key_path} = {value!r}")

    def _get_default_config(self) -> Dict[str, Any]:
        """由 schema 生成默认配置"""
        defaults: Dict[str, Any] = {}
        for section, section_schema in self.CONFIG_SCHEMA.items():
            defaults[section] = {
                key: (list(rule['default']) if isinstance(rule.get('default'), list) else rule.get('default'))
                for key, rule in section_schema.get('properties', {}).items()
            }
        return defaults

    def get(self, key_path, default=None):
        """
        使用点号分隔的路径获取配置值
        例如: config.get('pde.max_iterations')
        """
        value = self._config
        try:
            for key in key_path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            if default is not None:
                return default
            raise KeyError(f"配置项 '{key_path}' 不存在")

    def set(self, key_path, value):
        """使用点号分隔的路径设置配置值"""
        keys = key_path.split('.')
        node = self._config
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[keys[-1]] = value

    def section(self, name: str) -> Dict[str, Any]:
        """返回整个配置段的副本"""
        return dict(self._config.get(name, {}))

    def _validate_config(self):
        """验证配置是否符合schema"""
        self._validation_errors = []
        self._validation_warnings = []
        self._apply_defaults_and_validate(self._config, self.CONFIG_SCHEMA, "")
        if any("required" in error.lower() for error in self._validation_errors):
            raise ConfigValidationError("配置文件缺少必需字段 (required)")

    def _apply_defaults_and_validate(self, config: Dict[str, Any], schema: Dict[str, Any], path: str):
        """递归应用默认值并验证配置"""
        for key, schema_def in schema.items():
            current_path = f"{path}.{key}" if path else key

            if key not in config:
                if schema_def.get('required', False):
                    self._validation_errors.append(f"required: 缺少必需配置项 {current_path}")
                    continue
                if schema_def['type'] == 'dict':
                    config[key] = {}
                elif 'default' in schema_def:
                    default = schema_def['default']
                    config[key] = list(default) if isinstance(default, list) else default
                    continue
                else:
                    continue

            if not self._validate_value(config[key], schema_def, current_path):
                # 类型错误时回退到默认值
                if 'default' in schema_def:
                    config[key] = schema_def['default']
                    self._validation_warnings.append(f"使用默认值: {current_path} = {config[key]}")
                continue

            if schema_def['type'] == 'dict' and 'properties' in schema_def:
                self._apply_defaults_and_validate(config[key], schema_def['properties'], current_path)

    def _validate_value(self, value: Any, schema_def: Dict[str, Any], path: str) -> bool:
        """验证单个值，类型不符时返回 False"""
        expected_type = schema_def['type']
        type_checks = {
            'str': lambda v: isinstance(v, str),
            'int': lambda v: isinstance(v, int) and not isinstance(v, bool),
            'float': lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
            'bool': lambda v: isinstance(v, bool),
            'dict': lambda v: isinstance(v, dict),
            'list': lambda v: isinstance(v, list),
        }
        if not type_checks[expected_type](value):
            self._validation_errors.append(
                f"配置项 {path} 应为 {expected_type} 类型，实际为 {type(value).__name__}")
            return False

        if expected_type in ('int', 'float'):
            if 'min' in schema_def and value < schema_def['min']:
                self._validation_errors.append(f"配置项 {path} 值 {value} 小于最小值 {schema_def['min']}")
                return False
            if 'max' in schema_def and value > schema_def['max']:
                self._validation_errors.append(f"配置项 {path} 值 {value} 大于最大值 {schema_def['max']}")
                return False

        if 'enum' in schema_def and value not in schema_def['enum']:
            self._validation_errors.append(f"配置项 {path} 值 '{value}' 不在允许的选项中: {schema_def['enum']}")
            return False

        if expected_type == 'str' and 'pattern' in schema_def and not re.match(schema_def['pattern'], value):
            self._validation_errors.append(f"配置项 {path} 值 '{value}' 不符合格式要求")
            return False

        return True

    def get_validation_report(self) -> Dict[str, List[str]]:
        """获取验证报告"""
        return {
            'errors': self._validation_errors.copy(),
            'warnings': self._validation_warnings.copy()
        }

    def is_valid(self) -> bool:
        """检查配置是否有效（无错误）"""
        return len(self._validation_errors) == 0

    @property
    def log_level(self) -> str:
        return self.get('logging.level', 'INFO')


# 全局配置实例
config = Config()


def get_config_value(key_path: str, default=None):
    """
    获取配置值的便捷函数

    Args:
        key_path: 配置键路径，如 'radial.grid_points'
        default: 默认值
    """
    return config.get(key_path, default)


def update_config_value(key_path: str, value):
    """更新配置值的便捷函数"""
    config.set(key_path, value)
