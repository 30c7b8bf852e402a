"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Configuration management module that loads solver, experiment and output     ║
║   settings from an INI file with environment overrides. A template config is   ║
║   written when a named file does not exist.                                    ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import os
import configparser
from dotenv import load_dotenv
import logging

from lib.exceptions import ConfigError
from lib.solver import SolverConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_NAME = 'dro.ini'

DEFAULTS = {
    'solver': {
        'max_iters': '5000',
        'step_rule': 'diminishing',
        'c': '0.1',
        'decay': '0.999',
        'tol': '1e-6',
        'window': '50',
    },
    'experiment': {
        'workers': '1',
        'delta': '0.1',
        'alpha': '0.8',
        'folds': '5',
    },
    'output': {
        'directory': 'results',
        'database': '',
    },
}

# Environment variable -> (section, option)
ENV_OVERRIDES = {
    'DRO_WORKERS': ('experiment', 'workers'),
    'DRO_MAX_ITERS': ('solver', 'max_iters'),
    'DRO_OUTPUT_DIR': ('output', 'directory'),
    'DRO_DATABASE': ('output', 'database'),
}


class ConfigManager:
    def __init__(self, config_path=None):
        """
        Initialize the config manager

        Args:
            config_path: Path to the INI configuration file. When omitted,
                dro.ini next to main.py is read if present.
        """
        explicit = config_path is not None
        self.config_path = config_path or os.path.join(
            os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), DEFAULT_CONFIG_NAME)
        self.config = configparser.ConfigParser()
        self.config.read_dict(DEFAULTS)

        # Load environment variables from .env file if it exists
        load_dotenv()

        if os.path.exists(self.config_path):
            self.load_config()
        elif explicit:
            self._create_template_config()
            logger.warning(f"Created template configuration file at {self.config_path}")
            logger.warning("Using built-in defaults for this run.")

        self._load_env_variables()
        self._validate_config()

    def _create_template_config(self):
        """Create a template configuration file holding the defaults"""
        template = configparser.ConfigParser()
        template.read_dict(DEFAULTS)

        parent = os.path.dirname(self.config_path)
        if parent:
            os.makedirs(parent, exist_ok=True)

        with open(self.config_path, 'w') as configfile:
            template.write(configfile)

    def load_config(self):
        """Load configuration from INI file"""
        try:
            self.config.read(self.config_path)
        except configparser.Error as e:
            logger.error(f"Error parsing INI configuration: {e}")
            raise ConfigError(f"{self.config_path}: {e}") from e

        for section in self.config.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"{self.config_path}: unknown section [{section}]")
            for option in self.config.options(section):
                if option not in DEFAULTS[section]:
                    raise ConfigError(f"{self.config_path}: unknown key '{option}' in [{section}]")

    def _load_env_variables(self):
        """Override config with environment variables"""
        for variable, (section, option) in ENV_OVERRIDES.items():
            if os.environ.get(variable):
                self.config.set(section, option, os.environ[variable])

    def _get(self, section, option, convert):
        raw = self.config.get(section, option)
        try:
            return convert(raw)
        except ValueError as e:
            raise ConfigError(f"[{section}] {option} = '{raw}' is not a valid {convert.__name__}") from e

    def _validate_config(self):
        """Validate the numeric settings"""
        self.get_solver_config()
        defaults = self.get_experiment_defaults()
        if defaults['workers'] < 1:
            raise ConfigError(f"[experiment] workers must be >= 1, got {defaults['workers']}")
        if defaults['folds'] < 2:
            raise ConfigError(f"[experiment] folds must be >= 2, got {defaults['folds']}")
        if not 0 < defaults['delta'] < 1:
            raise ConfigError(f"[experiment] delta must lie in (0, 1), got {defaults['delta']}")
        if not 0 < defaults['alpha'] < 1:
            raise ConfigError(f"[experiment] alpha must lie in (0, 1), got {defaults['alpha']}")

    def get_config(self):
        """Get the full configuration object"""
        return self.config

    def get_solver_config(self):
        """Get the subgradient solver settings"""
        return SolverConfig(
            max_iters=self._get('solver', 'max_iters', int),
            step_rule=self.config.get('solver', 'step_rule'),
            c=self._get('solver', 'c', float),
            decay=self._get('solver', 'decay', float),
            tol=self._get('solver', 'tol', float),
            window=self._get('solver', 'window', int),
        )

    def get_experiment_defaults(self):
        """Get worker count, bound confidence, CVaR level and fold count"""
        return {
            'workers': self._get('experiment', 'workers', int),
            'delta': self._get('experiment', 'delta', float),
            'alpha': self._get('experiment', 'alpha', float),
            'folds': self._get('experiment', 'folds', int),
        }

    def get_output_folder(self):
        """Get the folder experiment reports are written to"""
        return self.config.get('output', 'directory')

    def get_database_path(self):
        """Get the path of the results database, or None when disabled"""
        return self.config.get('output', 'database') or None

    def get_seed(self):
        """Get the seed from DRO_SEED, or None"""
        raw = os.environ.get('DRO_SEED')
        if not raw:
            return None
        try:
            return int(raw)
        except ValueError as e:
            raise ConfigError(f"DRO_SEED = '{raw}' is not an integer") from e
