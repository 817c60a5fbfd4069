"""
Caching utilities
"""
import hashlib
import logging
from collections import OrderedDict
from typing import Optional, Any

from app.config import current_config

logger = logging.getLogger(__name__)

# In-memory store, oldest entries evicted first
_memory_cache = OrderedDict()


def get_cache_key(prefix: str, *args) -> str:
    """Generate a cache key from prefix and arguments"""
    key_string = f"{prefix}:{':'.join(str(arg) for arg in args)}"
    return hashlib.md5(key_string.encode()).hexdigest()


def get_cache(key: str) -> Optional[Any]:
    """Get value from cache"""
    if not current_config().ENABLE_CACHING:
        return None

    if key in _memory_cache:
        _memory_cache.move_to_end(key)
        logger.debug(f"Cache hit: {key}")
        return _memory_cache[key]
    return None


def set_cache(key: str, value: Any):
    """Set value in cache"""
    cfg = current_config()
    if not cfg.ENABLE_CACHING:
        return

    _memory_cache[key] = value
    _memory_cache.move_to_end(key)
    while len(_memory_cache) > cfg.CACHE_MAX_ENTRIES:
        evicted, _ = _memory_cache.popitem(last=False)
        logger.debug(f"Cache evicted: {evicted}")


def clear_cache():
    """Drop every cached entry"""
    _memory_cache.clear()
