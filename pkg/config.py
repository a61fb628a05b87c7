import os

from models import ConfigError

# Load environment variables from .env file
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # python-dotenv not installed, skip loading .env file


class Config:
    """Base configuration class"""

    # Monte Carlo depth (channel draws x frames per Eb/N0 point)
    TRIALS = int(os.environ.get('THP_TRIALS', '500'))
    FRAMES = int(os.environ.get('THP_FRAMES', '100'))
    SEED = int(os.environ.get('THP_SEED', '0'))

    # Coordination loop
    EPSILON = float(os.environ.get('THP_EPSILON', '1e-5'))
    MAX_ITERS = int(os.environ.get('THP_MAX_ITERS', '50'))

    # Parallel draws (joblib n_jobs)
    N_JOBS = int(os.environ.get('THP_JOBS', '1'))

    # Output
    PROGRESS = True

    # Logging
    LOG_LEVEL = os.environ.get('THP_LOG_LEVEL', 'INFO')


class QuickConfig(Config):
    """Smoke-test depth"""
    TRIALS = 20
    FRAMES = 10
    LOG_LEVEL = 'DEBUG'


class DeskConfig(Config):
    """Desk-scale reproduction depth"""
    TRIALS = 500
    FRAMES = 100
    LOG_LEVEL = 'WARNING'


# Configuration dictionary
config = {
    'quick': QuickConfig,
    'desk': DeskConfig,
    'default': Config
}


def get_config(name=None):
    """Return the profile named by `name` or THP_PROFILE."""
    name = name or os.environ.get('THP_PROFILE', 'default')
    try:
        return config[name]
    except KeyError:
        raise ConfigError(f"Unknown profile '{name}' (choose from {', '.join(sorted(config))})") from None
