"""
Configuration management for the verifier
"""
import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration"""

    # Output (reports, per-point tables, log files)
    OUTPUT_DIR = os.environ.get('VERIFIER_OUTPUT_DIR', 'output')

    # Sampling
    DEFAULT_RESOLUTION = 64
    MIN_RESOLUTION = 8
    POLAR_MARGIN_CELLS = 3  # polar caps of this many grid spacings are skipped
    GRID_STENCIL_POINTS = 7  # first-derivative stencil of grid covariant derivatives (sixth order)

    # Jet engines
    DEFAULT_ENGINE = 'exact'
    JET_CHUNK_SIZE = 2048
    AMBIENT_CHUNK_SIZE = 512

    # Data-parallel passes
    WORKERS = 4

    # Conditioning guards
    FRAME_CONDITION_LIMIT = 1e12
    CHART_CONDITION_LIMIT = 1.0 + 1e-9

    # Cache Configuration
    ENABLE_CACHING = True
    CACHE_MAX_ENTRIES = 16

    # Logging
    LOG_LEVEL = 'INFO'
    LOG_TO_FILE = True

    # Reports
    REPORT_SCHEMA_VERSION = '1.0'

    # Default tolerance per named check
    TOLERANCES = {
        'lagrangian_defect': 1e-8,
        'norm_identity_residual': 1e-10,
        'h_symmetry': 1e-8,
        'b_trace': 1e-10,
        'b_symmetry': 1e-8,
        'b_norm2_whitney': 1e-7,
        'gauss_residual': 1e-6,
        'maslov_defect': 1e-5,
        'maslov_equivalence': 1e-5,
        'codazzi_h': 1e-4,
        'codazzi_b': 1e-4,
        'simons_margin': 1e-5,
        'divergence_integral': 1e-6,
        'chart_split_volume': 1e-4,
        'threshold_equivalence': 1e-12,
        'expected_invariants': 1e-8,
        'lili_gap': 1e-12,
        'gap_verdict': 1e-9,
    }

    # Tolerances tied to identities of the theory: a run may tighten, never loosen
    IDENTITY_TOLERANCES = frozenset({
        'norm_identity_residual', 'b_trace', 'b_norm2_whitney', 'gauss_residual',
        'threshold_equivalence', 'lili_gap', 'expected_invariants',
    })


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    TESTING = False


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False
    TESTING = False


class TestingConfig(Config):
    """Testing configuration"""
    DEBUG = True
    TESTING = True
    LOG_TO_FILE = False
    LOG_LEVEL = 'WARNING'
    JET_CHUNK_SIZE = 1024
    AMBIENT_CHUNK_SIZE = 256
    WORKERS = 2


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}

_active_config = Config


def set_current_config(config_class):
    """Install the configuration read by the services"""
    global _active_config
    _active_config = config_class


def current_config():
    """Return the active configuration class"""
    return _active_config
