"""
Utility functions and configurations for the biphoton toolkit
"""

import logging
import os
import sys
from typing import Any, Dict

import structlog

from .errors import ValidationError


# Configure logging
def setup_logger():
    """Set up application logger"""
    log_level = os.getenv('LOG_LEVEL', 'INFO').upper()
    log_format = '%(message)s'

    # stdout carries data tables, so logs go to stderr
    handlers = [logging.StreamHandler(sys.stderr)]
    log_file = os.getenv('BIPHOTON_LOG_FILE')
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format=log_format,
        handlers=handlers
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt='iso'),
            structlog.processors.KeyValueRenderer(key_order=['timestamp', 'level', 'logger', 'event']),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    return structlog.get_logger('biphoton')

logger = setup_logger()


class ValidationHelper:
    """Helper class for validating numeric inputs"""

    @staticmethod
    def require_positive(name: str, value: float) -> float:
        if not value > 0:
            raise ValidationError(f"{name} must be positive, got {value!r}")
        return value

    @staticmethod
    def require_nonnegative(name: str, value: float) -> float:
        if not value >= 0:
            raise ValidationError(f"{name} must be nonnegative, got {value!r}")
        return value

    @staticmethod
    def require_range(name: str, value: float, lo: float, hi: float,
                      inclusive: bool = True) -> float:
        inside = lo <= value <= hi if inclusive else lo < value < hi
        if not inside:
            brackets = "[]" if inclusive else "()"
            raise ValidationError(
                f"{name}={value!r} outside {brackets[0]}{lo!r}, {hi!r}{brackets[1]}"
            )
        return value

    @staticmethod
    def require_count(name: str, value: int, minimum: int) -> int:
        if int(value) != value or value < minimum:
            raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
        return int(value)


class ConfigHelper:
    """Helper class for configuration management"""

    @staticmethod
    def get_config() -> Dict[str, Any]:
        """Get application configuration from the environment"""
        return {
            'scenario_dir': os.getenv('BIPHOTON_SCENARIO_DIR'),
            'log_level': os.getenv('LOG_LEVEL', 'INFO'),
            'log_file': os.getenv('BIPHOTON_LOG_FILE'),
            'float_format': os.getenv('BIPHOTON_FLOAT_FORMAT', '%.12g'),
        }

    @staticmethod
    def validate_config() -> Dict[str, Any]:
        """Validate the environment configuration"""
        config = ConfigHelper.get_config()
        errors = []

        if config['scenario_dir'] and not os.path.isdir(config['scenario_dir']):
            errors.append(f"BIPHOTON_SCENARIO_DIR does not exist: {config['scenario_dir']}")

        try:
            config['float_format'] % 1.5
        except (TypeError, ValueError):
            errors.append(f"BIPHOTON_FLOAT_FORMAT is not a float format: {config['float_format']}")

        return {
            'valid': len(errors) == 0,
            'errors': errors,
            'config': config
        }
