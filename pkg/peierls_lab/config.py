"""
Global settings: config.json on disk plus environment overrides from .env
"""

import os
import json
import logging
from typing import Any, Dict, Optional

from dotenv import load_dotenv

# .env overrides for PEIERLS_LAB_* settings
load_dotenv()

logger = logging.getLogger(__name__)

ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class Config:
    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or os.getenv('PEIERLS_LAB_CONFIG') or os.path.join(ROOT_DIR, 'config.json')
        self.config = self.load_config()

        settings = self.config.get('settings', {})
        self.OUTPUT_DIR = os.getenv('PEIERLS_LAB_OUTPUT_DIR') or settings.get('output_dir', 'runs')
        self.JOBS = int(os.getenv('PEIERLS_LAB_JOBS') or settings.get('jobs', 1))
        self.LOG_LEVEL = (os.getenv('PEIERLS_LAB_LOG_LEVEL') or settings.get('log_level', 'INFO')).upper()
        seed = os.getenv('PEIERLS_LAB_SEED')
        self.SEED = int(seed) if seed is not None else settings.get('seed')

        if self.JOBS < 1:
            raise ValueError("PEIERLS_LAB_JOBS must be a positive integer")

    def load_config(self) -> Dict[str, Any]:
        """Load the JSON config; a missing or broken file yields {}."""
        try:
            if os.path.exists(self.config_path):
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    return json.load(f)
        except Exception as e:
            logger.error(f"Failed to load config {self.config_path}: {e}")
        return {}

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.config.get(name, {}))


def setup_logging(level: str = 'INFO'):
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, level.upper(), logging.INFO))
