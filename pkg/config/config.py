"""
系统配置文件
Project-wide defaults for the RWI table, structure analysis and experiment harness
"""

import os
from typing import Dict, Any, List

from dotenv import load_dotenv

# .env in the working directory overrides nothing already exported
load_dotenv()


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == 'true'


class Config:
    """系统配置类"""

    # 基本配置
    APP_NAME = "rwi-sim"
    APP_VERSION = "1.0.0"
    DEBUG = _env_bool('DEBUG', 'False')

    # 随机数配置
    # Root seed when the caller gives none. Never derived from the clock.
    DEFAULT_SEED = int(os.getenv('RWI_DEFAULT_SEED', '20190417'))
    PAIR_BATCH_SIZE = int(os.getenv('RWI_PAIR_BATCH_SIZE', '4096'))

    # 插入配置
    MAX_WALK_FACTOR = int(os.getenv('RWI_MAX_WALK_FACTOR', '64'))
    BOTH_FREE_POLICY = os.getenv('RWI_BOTH_FREE_POLICY', 'follow_d')
    FLIP_AUDIT_LOG = _env_bool('RWI_FLIP_AUDIT_LOG', str(DEBUG))

    # 结构分析配置
    NEIGHBOR_COUNTING = os.getenv('RWI_NEIGHBOR_COUNTING', 'distinct')
    ORACLE_MAX_N = int(os.getenv('RWI_ORACLE_MAX_N', '1000'))

    # 实验配置
    BOUND_CONSTANT_M = float(os.getenv('RWI_BOUND_CONSTANT_M', '96'))
    PROBES_PER_RUN = int(os.getenv('RWI_PROBES_PER_RUN', '1000'))
    STAT_SLACK = float(os.getenv('RWI_STAT_SLACK', '3.0'))
    MIN_BUCKET_SAMPLES = int(os.getenv('RWI_MIN_BUCKET_SAMPLES', '100'))

    # 性能配置
    MAX_WORKERS = int(os.getenv('RWI_MAX_WORKERS', '1'))
    SHOW_PROGRESS = _env_bool('RWI_SHOW_PROGRESS', 'False')

    # 日志配置
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', '')

    @classmethod
    def get_config_dict(cls) -> Dict[str, Any]:
        """获取配置字典"""
        return {
            key: getattr(cls, key)
            for key in dir(cls)
            if key.isupper() and not callable(getattr(cls, key))
        }

    @classmethod
    def validate_config(cls) -> List[str]:
        """验证配置, returns the list of problems (empty when valid)"""
        errors = []

        if cls.BOTH_FREE_POLICY not in ('follow_d', 'prefer_first'):
            errors.append(f"RWI_BOTH_FREE_POLICY must be follow_d or prefer_first: {cls.BOTH_FREE_POLICY}")

        if cls.NEIGHBOR_COUNTING not in ('distinct', 'multiplicity'):
            errors.append(f"RWI_NEIGHBOR_COUNTING must be distinct or multiplicity: {cls.NEIGHBOR_COUNTING}")

        if cls.MAX_WALK_FACTOR < 1:
            errors.append("RWI_MAX_WALK_FACTOR must be positive")

        if cls.PAIR_BATCH_SIZE < 1:
            errors.append("RWI_PAIR_BATCH_SIZE must be positive")

        if cls.BOUND_CONSTANT_M <= 0:
            errors.append("RWI_BOUND_CONSTANT_M must be positive")

        if cls.STAT_SLACK < 1:
            errors.append("RWI_STAT_SLACK must be at least 1")

        if cls.MAX_WORKERS < 1:
            errors.append("RWI_MAX_WORKERS must be positive")

        return errors


# 创建全局配置实例
config = Config()

# 环境变量模板
ENV_TEMPLATE = """
# rwi-sim environment template
# copy to .env and adjust

DEBUG=False
RWI_DEFAULT_SEED=20190417
RWI_PAIR_BATCH_SIZE=4096
RWI_MAX_WALK_FACTOR=64
RWI_BOTH_FREE_POLICY=follow_d
RWI_FLIP_AUDIT_LOG=False
RWI_NEIGHBOR_COUNTING=distinct
RWI_ORACLE_MAX_N=1000
RWI_BOUND_CONSTANT_M=96
RWI_PROBES_PER_RUN=1000
RWI_STAT_SLACK=3.0
RWI_MIN_BUCKET_SAMPLES=100
RWI_MAX_WORKERS=1
RWI_SHOW_PROGRESS=False
LOG_LEVEL=INFO
LOG_FILE=
"""


def create_env_file():
    """创建环境变量模板文件"""
    if not os.path.exists('.env'):
        with open('.env.template', 'w', encoding='utf-8') as f:
            f.write(ENV_TEMPLATE)
        print("Created .env.template; copy it to .env to override defaults")


if __name__ == "__main__":
    problems = config.validate_config()
    if problems:
        print("❌ 配置验证失败")
        for problem in problems:
            print(f"  - {problem}")
    else:
        print("✅ 配置验证通过")

    create_env_file()

    print("\n当前配置:")
    for key, value in config.get_config_dict().items():
        print(f"  {key}: {value}")
